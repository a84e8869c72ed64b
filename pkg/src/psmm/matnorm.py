"""Kronecker-factored Gaussian parameter estimation.

The covariance of the vectorized predictor is modeled as a Kronecker
product of small per-mode factors.  Factors are estimated by alternating
closed-form updates (the "flip-flop" iteration); each update maximizes
the Gaussian likelihood in one factor with the others held fixed, so the
log-likelihood is non-decreasing sweep over sweep.

Scale identifiability: multiplying one factor by c and dividing another
by c leaves the Kronecker product unchanged.  After fitting, every factor
except the first is rescaled to have trace equal to its dimension; the
first factor carries the overall scale.  For matrices this pins
trace(sigma_col) = d2.
"""

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .data import MatrixDataset, TensorDataset
from .errors import SampleTooSmall, SingularCovariance

_LOG_2PI = math.log(2.0 * math.pi)


def _symmetrize(m):
    return 0.5 * (m + m.T)


def _check_symmetric(m, name, rtol=1e-12):
    scale = max(float(np.abs(m).max()), 1e-300) if m.size else 1.0
    asym = float(np.abs(m - m.T).max())
    if asym > rtol * max(scale, 1.0):
        raise ValueError(f"{name} is not symmetric (max asymmetry {asym:.3e})")


def sym_inv_sqrt(m, ridge=0.0):
    """Symmetric inverse square root: the SPD R with R (M + ridge*I) R = I."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    _check_symmetric(m, "matrix", rtol=1e-10)
    w, v = np.linalg.eigh(_symmetrize(m))
    wr = w + ridge
    if wr.min() <= 0.0:
        raise SingularCovariance(
            f"smallest eigenvalue + ridge = {wr.min():.3e} is not positive"
        )
    return (v * wr**-0.5) @ v.T


def _inv_sqrt_ridged(sigma, ridge):
    # Ridge is applied relative to the mean eigenvalue (trace/dim) so it is
    # invariant to the overall scale of the factor.
    w, v = np.linalg.eigh(sigma)
    if w.min() <= 0.0:
        raise SingularCovariance(
            f"covariance iterate has smallest eigenvalue {w.min():.3e}"
        )
    wr = w + ridge * float(w.mean())
    return (v * wr**-0.5) @ v.T


def _mode_multiply(batch, mat, mode):
    """Multiply mode `mode` (0-based, excluding the sample axis) by `mat`."""
    moved = np.tensordot(mat, batch, axes=(1, mode + 1))
    return np.moveaxis(moved, 0, mode + 1)


def _kron_fro_norm_sq(sigmas):
    out = 1.0
    for s in sigmas:
        out *= float((s * s).sum())
    return out


def _kron_rel_change(old, new):
    # || kron(old) - kron(new) ||_F computed without forming Kronecker
    # products: cross terms reduce to products of per-factor traces.
    cross = 1.0
    for a, b in zip(old, new):
        cross *= float((a * b).sum())
    dist_sq = max(_kron_fro_norm_sq(old) + _kron_fro_norm_sq(new) - 2.0 * cross, 0.0)
    denom = math.sqrt(max(_kron_fro_norm_sq(new), 1e-300))
    return math.sqrt(dist_sq) / denom


@dataclass(eq=False)
class TensorNormParams:
    """Mean plus per-mode covariance factors of a tensor-normal model."""

    mean: np.ndarray
    sigmas: list
    trace_normalized: bool = True
    converged: bool = True
    iterations: int = 0
    loglik_path: tuple = field(default_factory=tuple)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.sigmas = [np.asarray(s, dtype=np.float64) for s in self.sigmas]
        if self.mean.ndim != len(self.sigmas):
            raise ValueError("mean order must match the number of factors")
        for k, s in enumerate(self.sigmas):
            if s.shape != (self.mean.shape[k],) * 2:
                raise ValueError(f"factor {k} shape {s.shape} does not match mean")
            _check_symmetric(s, f"sigma_{k}")
        for w, _ in self._eighs:
            if w.min() <= 0.0:
                raise SingularCovariance(
                    f"covariance factor has smallest eigenvalue {w.min():.3e}"
                )

    @property
    def dims(self):
        return self.mean.shape

    @property
    def order(self):
        return self.mean.ndim

    @functools.cached_property
    def _eighs(self):
        return [np.linalg.eigh(_symmetrize(s)) for s in self.sigmas]

    def factor_inv(self, k):
        w, v = self._eighs[k]
        return (v / w) @ v.T

    def factor_inv_sqrt(self, k):
        w, v = self._eighs[k]
        return (v * w**-0.5) @ v.T

    def to_matrix(self):
        if self.order != 2:
            raise ValueError("only order-2 parameters convert to matrix form")
        return MatNormParams(
            self.mean,
            self.sigmas[0],
            self.sigmas[1],
            trace_normalized=self.trace_normalized,
            converged=self.converged,
            iterations=self.iterations,
            loglik_path=self.loglik_path,
        )


@dataclass(eq=False)
class MatNormParams:
    """Mean plus row/column covariance factors of a matrix-normal model.

    ``trace_normalized`` records the scale convention (trace of sigma_col
    equals d2, with the overall scale carried by sigma_row).
    """

    mean: np.ndarray
    sigma_row: np.ndarray
    sigma_col: np.ndarray
    trace_normalized: bool = True
    converged: bool = True
    iterations: int = 0
    loglik_path: tuple = field(default_factory=tuple)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        if self.mean.ndim != 2:
            raise ValueError("mean must be a d1 x d2 matrix")
        self.sigma_row = np.asarray(self.sigma_row, dtype=np.float64)
        self.sigma_col = np.asarray(self.sigma_col, dtype=np.float64)
        if self.sigma_row.shape != (self.mean.shape[0],) * 2:
            raise ValueError("sigma_row shape does not match mean")
        if self.sigma_col.shape != (self.mean.shape[1],) * 2:
            raise ValueError("sigma_col shape does not match mean")
        _check_symmetric(self.sigma_row, "sigma_row")
        _check_symmetric(self.sigma_col, "sigma_col")
        for w, _ in self._eighs:
            if w.min() <= 0.0:
                raise SingularCovariance(
                    f"covariance factor has smallest eigenvalue {w.min():.3e}"
                )

    @property
    def d1(self):
        return self.mean.shape[0]

    @property
    def d2(self):
        return self.mean.shape[1]

    @functools.cached_property
    def _eighs(self):
        return [
            np.linalg.eigh(_symmetrize(self.sigma_row)),
            np.linalg.eigh(_symmetrize(self.sigma_col)),
        ]

    def _pow(self, k, power):
        w, v = self._eighs[k]
        return (v * w**power) @ v.T

    @property
    def row_inv(self):
        return self._pow(0, -1.0)

    @property
    def col_inv(self):
        return self._pow(1, -1.0)

    @property
    def row_inv_sqrt(self):
        return self._pow(0, -0.5)

    @property
    def col_inv_sqrt(self):
        return self._pow(1, -0.5)

    def to_tensor(self):
        return TensorNormParams(
            self.mean,
            [self.sigma_row, self.sigma_col],
            trace_normalized=self.trace_normalized,
            converged=self.converged,
            iterations=self.iterations,
            loglik_path=self.loglik_path,
        )


@dataclass(eq=False)
class WhitenedDataset:
    """Centered samples transformed by the inverse square roots of the factors.

    When the parameters come from a converged fit on the same data,
    (1/(d2 n)) sum_i Z_i Z_i^T and (1/(d1 n)) sum_i Z_i^T Z_i are both
    identity matrices up to roughly ten times the fit tolerance.
    """

    samples: np.ndarray
    row_inv_sqrt: np.ndarray
    col_inv_sqrt: np.ndarray
    params: MatNormParams


def sample_mean(data):
    """Entrywise arithmetic mean of the samples."""
    return data.samples.mean(axis=0)


def gaussian_loglik(samples, mean, sigmas):
    """Log-likelihood of i.i.d. samples under a tensor-normal model."""
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[0]
    dims = samples.shape[1:]
    total = int(np.prod(dims))
    z = samples - np.asarray(mean, dtype=np.float64)
    logdet = 0.0
    for k, sigma in enumerate(sigmas):
        w, v = np.linalg.eigh(_symmetrize(np.asarray(sigma, dtype=np.float64)))
        if w.min() <= 0.0:
            raise SingularCovariance("log-likelihood needs positive definite factors")
        z = _mode_multiply(z, (v * w**-0.5) @ v.T, k)
        logdet += (total / dims[k]) * float(np.log(w).sum())
    quad = float((z * z).sum())
    return -0.5 * (n * total * _LOG_2PI + n * logdet + quad)


def _guard_sample_size(n, dims):
    total = int(np.prod(dims))
    bound = max(d / (total // d) for d in dims) + 1.0
    if n < bound:
        raise SampleTooSmall(
            f"n = {n} is below the positive-definiteness bound "
            f"n >= max_k(d_k / prod(d_j, j != k)) + 1 = {bound:g}"
        )


def flipflop_fit_tensor(data, tol=1e-8, max_iter=200, ridge=1e-8, sigmas_init=None):
    """Alternating factorwise MLE of a tensor-normal model.

    Each factor update whitens the centered samples along every other mode
    and averages the mode-k Gram matrices:

        sigma_k = (1/(n * prod_{j != k} d_j)) * sum_i M_k(Z_i) M_k(Z_i)^T,

    with Z_i the centered sample whitened on all modes but k.  Iteration
    stops when the relative Frobenius change of the Kronecker product of
    the factors falls below ``tol``; exceeding ``max_iter`` returns the
    last iterate tagged unconverged.
    """
    if not isinstance(data, TensorDataset):
        data = data.to_tensor()
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    x = data.samples
    n = data.n
    dims = data.dims
    order = len(dims)
    total = int(np.prod(dims))
    _guard_sample_size(n, dims)

    mean = x.mean(axis=0)
    xc = x - mean
    if sigmas_init is None:
        sigmas = [np.eye(d) for d in dims]
    else:
        if len(sigmas_init) != order:
            raise ValueError("sigmas_init must supply one matrix per mode")
        sigmas = [np.asarray(s, dtype=np.float64).copy() for s in sigmas_init]

    logliks = []
    converged = False
    iterations = 0
    prev = None
    for iterations in range(1, max_iter + 1):
        for k in range(order):
            z = xc
            for j in range(order):
                if j != k:
                    z = _mode_multiply(z, _inv_sqrt_ridged(sigmas[j], ridge), j)
            axes = [a for a in range(order + 1) if a != k + 1]
            gram = np.tensordot(z, z, axes=(axes, axes))
            sigmas[k] = _symmetrize(gram / (n * (total // dims[k])))
        logliks.append(gaussian_loglik(x, mean, sigmas))
        if prev is not None and _kron_rel_change(prev, sigmas) < tol:
            converged = True
            break
        prev = [s.copy() for s in sigmas]

    for k in range(1, order):
        trace = float(np.trace(sigmas[k]))
        if trace <= 0.0:
            raise SingularCovariance("covariance factor has non-positive trace")
        scale = dims[k] / trace
        sigmas[k] = sigmas[k] * scale
        sigmas[0] = sigmas[0] / scale

    return TensorNormParams(
        mean,
        sigmas,
        trace_normalized=True,
        converged=converged,
        iterations=iterations,
        loglik_path=tuple(logliks),
    )


def flipflop_fit(data, tol=1e-8, max_iter=200, ridge=1e-8, sigma_col_init=None):
    """Matrix-normal flip-flop fit; the order-2 case of the tensor fit.

    Starts from sigma_col = I and updates sigma_row then sigma_col each
    sweep.  Requires n >= max(d1/d2, d2/d1) + 1, the sharp condition for
    the iteration to converge to positive definite factors.
    """
    if isinstance(data, TensorDataset):
        data = data.to_matrix()
    init = None
    if sigma_col_init is not None:
        init = [np.eye(data.d1), np.asarray(sigma_col_init, dtype=np.float64)]
    tensor_params = flipflop_fit_tensor(
        data.to_tensor(), tol=tol, max_iter=max_iter, ridge=ridge, sigmas_init=init
    )
    return tensor_params.to_matrix()


def whiten(data, params):
    """Center and whiten samples: Z_i = R_r (X_i - mean) R_c with R = Sigma^{-1/2}."""
    if (data.d1, data.d2) != (params.d1, params.d2):
        raise ValueError(
            f"dataset shape ({data.d1}, {data.d2}) does not match parameters "
            f"({params.d1}, {params.d2})"
        )
    rr = params.row_inv_sqrt
    rc = params.col_inv_sqrt
    z = np.einsum("ab,nbc,cd->nad", rr, data.samples - params.mean, rc)
    return WhitenedDataset(samples=z, row_inv_sqrt=rr, col_inv_sqrt=rc, params=params)
