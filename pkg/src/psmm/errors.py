"""Exception types shared across the package.

``exit_code`` drives the command-line error taxonomy: 2 for input or
configuration problems, 3 for numerical failures.
"""


class PsmmError(Exception):
    exit_code = 3


class SampleTooSmall(PsmmError):
    """Too few samples for the covariance iteration to stay positive definite."""

    exit_code = 2


class SingularCovariance(PsmmError):
    """A covariance matrix or iterate lost positive definiteness."""


class InfeasibleLabels(PsmmError):
    """A dual classification problem needs both label classes."""

    exit_code = 2


class DegenerateDirection(PsmmError):
    """A direction update received an effectively zero fixed direction."""


class TooFewSlices(PsmmError):
    """No response slice retains two samples of each class."""

    exit_code = 2
