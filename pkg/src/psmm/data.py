"""Containers for labeled matrix- and tensor-valued samples."""

from dataclasses import dataclass

import numpy as np


def _as_finite_array(values, name):
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _check_responses(responses, n):
    if responses is None:
        return None
    arr = _as_finite_array(responses, "responses")
    if arr.shape != (n,):
        raise ValueError(f"responses must have shape ({n},), got {arr.shape}")
    return arr


@dataclass(eq=False)
class MatrixDataset:
    """n matrices of common shape (d1, d2) with an optional response vector."""

    samples: np.ndarray
    responses: np.ndarray | None = None

    def __post_init__(self):
        self.samples = _as_finite_array(self.samples, "samples")
        if self.samples.ndim != 3:
            raise ValueError(
                f"samples must have shape (n, d1, d2), got {self.samples.shape}"
            )
        if self.samples.shape[0] < 1:
            raise ValueError("need at least one sample")
        self.responses = _check_responses(self.responses, self.samples.shape[0])

    @property
    def n(self):
        return self.samples.shape[0]

    @property
    def d1(self):
        return self.samples.shape[1]

    @property
    def d2(self):
        return self.samples.shape[2]

    def to_tensor(self):
        return TensorDataset(self.samples, self.responses)


@dataclass(eq=False)
class TensorDataset:
    """n order-K arrays of common shape (d1, ..., dK), K >= 2.

    The K = 2 case round-trips losslessly with :class:`MatrixDataset`.
    """

    samples: np.ndarray
    responses: np.ndarray | None = None

    def __post_init__(self):
        self.samples = _as_finite_array(self.samples, "samples")
        if self.samples.ndim < 3:
            raise ValueError(
                f"samples must have shape (n, d1, ..., dK) with K >= 2, got {self.samples.shape}"
            )
        if self.samples.shape[0] < 1:
            raise ValueError("need at least one sample")
        self.responses = _check_responses(self.responses, self.samples.shape[0])

    @property
    def n(self):
        return self.samples.shape[0]

    @property
    def dims(self):
        return self.samples.shape[1:]

    @property
    def order(self):
        return self.samples.ndim - 1

    def to_matrix(self):
        if self.order != 2:
            raise ValueError("only order-2 tensor datasets convert to matrices")
        return MatrixDataset(self.samples, self.responses)
