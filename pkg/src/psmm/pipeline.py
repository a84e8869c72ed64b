"""End-to-end central-subspace estimation.

Steps: fit the Kronecker covariance model, slice the response at sample
quantiles into binary labelings, fit one rank-1 machine per retained
slice, aggregate the slice directions into outer-product sums, and read
the subspace bases off the leading eigenvectors (with the ranks either
fixed or selected by a penalized eigenvalue-sum criterion).
"""

from dataclasses import dataclass, field

import numpy as np

from .data import MatrixDataset
from .errors import TooFewSlices
from .matnorm import MatNormParams, flipflop_fit, flipflop_fit_tensor
from .smm import fit_rank1_smm, fit_rank1_stm, update_u


@dataclass
class PsmmConfig:
    """Hyperparameters for the estimation pipeline.

    ``dims`` fixes the subspace ranks (one per mode); None selects them
    by the eigenvalue-sum criterion.  ``symmetric`` treats square matrix
    predictors as symmetric: the row and column aggregates are summed and
    a single basis serves both sides.
    """

    slices: int = 10
    lam: float = 100.0
    flipflop_tol: float = 1e-8
    flipflop_max_iter: int = 200
    flipflop_ridge: float = 1e-8
    smm_tol: float = 1e-6
    smm_max_iter: int = 100
    restarts: int = 2
    dims: tuple | None = None
    seed: int = 0
    symmetric: bool = False

    def __post_init__(self):
        if self.slices < 2:
            raise ValueError("slice count must be at least 2 (H >= 2)")
        if not self.lam > 0.0:
            raise ValueError("lam must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.dims is not None:
            self.dims = tuple(int(r) for r in self.dims)
            if any(r < 1 for r in self.dims):
                raise ValueError("fixed dims must be positive")

    def to_dict(self):
        out = dict(self.__dict__)
        out["dims"] = None if self.dims is None else list(self.dims)
        return out


@dataclass(eq=False)
class SliceLabelSet:
    """Quantile cutpoints and the per-slice binary labelings that survive.

    Slice h labels Y_i > q_h as +1 and the rest as -1, where q_h is the
    ceil(n h / H)-th order statistic.  Slices with fewer than two samples
    in either class are dropped (slice H always is, since q_H = max Y).
    """

    cutpoints: np.ndarray
    retained: list
    labels: list


@dataclass(eq=False)
class CandidateAggregate:
    """Outer-product sums of the slice directions and their eigensystems."""

    u_hat: np.ndarray
    v_hat: np.ndarray
    eigvals_row: np.ndarray
    eigvals_col: np.ndarray
    eigvecs_row: np.ndarray
    eigvecs_col: np.ndarray


@dataclass(eq=False)
class SubspaceEstimate:
    """Orthonormal row/column bases with aggregation eigenvalues."""

    row_basis: np.ndarray
    col_basis: np.ndarray
    eigvals_row: np.ndarray
    eigvals_col: np.ndarray
    selected_dims: tuple
    config: dict
    convergence: list = field(default_factory=list)


@dataclass(eq=False)
class TensorSubspaceEstimate:
    """One orthonormal basis and eigenvalue list per tensor mode."""

    mode_bases: list
    mode_eigvals: list
    selected_dims: tuple
    config: dict
    convergence: list = field(default_factory=list)


def slice_labels(responses, n_slices):
    """Binary labelings of the response at the (h/H) sample quantiles."""
    y = np.asarray(responses, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("responses must be a vector")
    n = y.size
    if n_slices < 2:
        raise ValueError("slice count must be at least 2 (H >= 2)")
    if n < 4:
        raise ValueError("need at least 4 responses to slice")
    order_stats = np.sort(y)
    cutpoints = np.empty(n_slices)
    retained = []
    labels = []
    for h in range(1, n_slices + 1):
        idx = -((-n * h) // n_slices)  # ceil(n h / H), 1-based order statistic
        cut = order_stats[min(idx, n) - 1]
        cutpoints[h - 1] = cut
        lab = np.where(y > cut, 1, -1)
        if (lab > 0).sum() >= 2 and (lab < 0).sum() >= 2:
            retained.append(h)
            labels.append(lab)
    if not retained:
        raise TooFewSlices(
            "no slice keeps two samples of each class; is the response constant?"
        )
    return SliceLabelSet(cutpoints=cutpoints, retained=retained, labels=labels)


def aggregate_directions(triples):
    """Sum the outer products of the balanced slice directions, in slice order."""
    if not triples:
        raise ValueError("need at least one direction triple")
    d1 = triples[0].u.shape[0]
    d2 = triples[0].v.shape[0]
    u_hat = np.zeros((d1, d1))
    v_hat = np.zeros((d2, d2))
    for triple in triples:
        if triple.u.shape != (d1,) or triple.v.shape != (d2,):
            raise ValueError("direction triples have inconsistent dimensions")
        u_hat += np.outer(triple.u, triple.u)
        v_hat += np.outer(triple.v, triple.v)
    wu, qu = _eigh_descending(u_hat)
    wv, qv = _eigh_descending(v_hat)
    return CandidateAggregate(
        u_hat=u_hat,
        v_hat=v_hat,
        eigvals_row=wu,
        eigvals_col=wv,
        eigvecs_row=qu,
        eigvecs_col=qv,
    )


def _eigh_descending(mat):
    w, v = np.linalg.eigh(0.5 * (mat + mat.T))
    return w[::-1].copy(), v[:, ::-1].copy()


def select_dimension_bic(eigenvalues, n):
    """Rank maximizing sum_{i<=r} lambda_i - lambda_1 * r / sqrt(n).

    Ties break toward the smaller rank.
    """
    vals = np.asarray(eigenvalues, dtype=np.float64)
    if vals.ndim != 1 or vals.size == 0:
        raise ValueError("eigenvalues must be a non-empty vector")
    if n < 1:
        raise ValueError("n must be at least 1")
    scale = max(float(vals[0]), 1e-300)
    if np.any(np.diff(vals) > 1e-10 * scale) or vals[-1] < -1e-10 * scale:
        raise ValueError("eigenvalues must be sorted descending and non-negative")
    ranks = np.arange(1, vals.size + 1)
    criterion = np.cumsum(vals) - (vals[0] / np.sqrt(n)) * ranks
    return int(np.argmax(criterion)) + 1


def _slice_seed(seed, h):
    return int(np.random.SeedSequence((seed, h)).generate_state(1, np.uint64)[0])


def _select_rank(eigvals, fixed, n):
    if fixed is not None:
        return int(fixed)
    return select_dimension_bic(np.maximum(eigvals, 0.0), n)


def _validate_fixed_dims(dims, shape):
    if dims is None:
        return
    if len(dims) != len(shape):
        raise ValueError(f"dims must have {len(shape)} entries, got {len(dims)}")
    for r, d in zip(dims, shape):
        if not 1 <= r < d:
            raise ValueError(f"fixed rank {r} must satisfy 1 <= r < {d}")


def fit_psmm(data, config=None):
    """Estimate the central row/column subspaces of a matrix predictor."""
    config = config if config is not None else PsmmConfig()
    if data.responses is None:
        raise ValueError("dataset has no responses")
    if config.symmetric and data.d1 != data.d2:
        raise ValueError("symmetric mode requires square predictors")
    _validate_fixed_dims(config.dims, (data.d1, data.d2))
    if config.symmetric and config.dims is not None and config.dims[0] != config.dims[1]:
        raise ValueError("symmetric mode requires equal row and column ranks")

    params = flipflop_fit(
        data,
        tol=config.flipflop_tol,
        max_iter=config.flipflop_max_iter,
        ridge=config.flipflop_ridge,
    )
    slices = slice_labels(data.responses, config.slices)
    triples = []
    convergence = []
    for h, labels in zip(slices.retained, slices.labels):
        triple = fit_rank1_smm(
            data,
            labels,
            params,
            lam=config.lam,
            tol=config.smm_tol,
            max_iter=config.smm_max_iter,
            restarts=config.restarts,
            seed=_slice_seed(config.seed, h),
        )
        triples.append(triple)
        convergence.append(
            {
                "slice": h,
                "converged": bool(triple.converged),
                "iterations": int(triple.iterations),
                "objective": float(triple.objective),
            }
        )
    aggregate = aggregate_directions(triples)

    n = data.n
    if config.symmetric:
        combined = aggregate.u_hat + aggregate.v_hat
        w, q = _eigh_descending(combined)
        w = np.maximum(w, 0.0)
        r = _select_rank(w, None if config.dims is None else config.dims[0], n)
        basis = q[:, :r]
        return SubspaceEstimate(
            row_basis=basis,
            col_basis=basis,
            eigvals_row=w,
            eigvals_col=w.copy(),
            selected_dims=(r, r),
            config=config.to_dict(),
            convergence=convergence,
        )

    eig_row = np.maximum(aggregate.eigvals_row, 0.0)
    eig_col = np.maximum(aggregate.eigvals_col, 0.0)
    r1 = _select_rank(eig_row, None if config.dims is None else config.dims[0], n)
    r2 = _select_rank(eig_col, None if config.dims is None else config.dims[1], n)
    return SubspaceEstimate(
        row_basis=aggregate.eigvecs_row[:, :r1],
        col_basis=aggregate.eigvecs_col[:, :r2],
        eigvals_row=eig_row,
        eigvals_col=eig_col,
        selected_dims=(r1, r2),
        config=config.to_dict(),
        convergence=convergence,
    )


def fit_pstm(data, config=None):
    """Estimate one central subspace per tensor mode."""
    config = config if config is not None else PsmmConfig()
    if data.responses is None:
        raise ValueError("dataset has no responses")
    if config.symmetric:
        raise ValueError("symmetric mode applies to matrix predictors only")
    dims = tuple(data.dims)
    _validate_fixed_dims(config.dims, dims)

    params = flipflop_fit_tensor(
        data,
        tol=config.flipflop_tol,
        max_iter=config.flipflop_max_iter,
        ridge=config.flipflop_ridge,
    )
    slices = slice_labels(data.responses, config.slices)
    direction_sets = []
    convergence = []
    for h, labels in zip(slices.retained, slices.labels):
        fitted = fit_rank1_stm(
            data,
            labels,
            params,
            lam=config.lam,
            tol=config.smm_tol,
            max_iter=config.smm_max_iter,
            restarts=config.restarts,
            seed=_slice_seed(config.seed, h),
        )
        direction_sets.append(fitted)
        convergence.append(
            {
                "slice": h,
                "converged": bool(fitted.converged),
                "iterations": int(fitted.iterations),
                "objective": float(fitted.objective),
            }
        )

    n = data.n
    mode_bases = []
    mode_eigvals = []
    selected = []
    for k, d in enumerate(dims):
        agg = np.zeros((d, d))
        for fitted in direction_sets:
            agg += np.outer(fitted.us[k], fitted.us[k])
        w, q = _eigh_descending(agg)
        w = np.maximum(w, 0.0)
        r = _select_rank(w, None if config.dims is None else config.dims[k], n)
        mode_bases.append(q[:, :r])
        mode_eigvals.append(w)
        selected.append(r)
    return TensorSubspaceEstimate(
        mode_bases=mode_bases,
        mode_eigvals=mode_eigvals,
        selected_dims=tuple(selected),
        config=config.to_dict(),
        convergence=convergence,
    )


def fit_psvm_baseline(data, config=None):
    """Vectorized baseline: one linear SVM per slice on vec(X).

    Samples are vectorized column-major, the full covariance of vec(X) is
    estimated with a small ridge, and each slice solves the d1*d2-by-1
    special case of the direction update (column factor pinned to the
    scalar 1).  Aggregation and eigen-selection then proceed as usual,
    yielding a single basis for vec(X).  Fixed dims (r1, r2) request rank
    r1 * r2 in the vectorized space.
    """
    config = config if config is not None else PsmmConfig()
    if data.responses is None:
        raise ValueError("dataset has no responses")
    _validate_fixed_dims(config.dims, (data.d1, data.d2))

    n = data.n
    dim = data.d1 * data.d2
    vecs = data.samples.transpose(0, 2, 1).reshape(n, dim)
    vbar = vecs.mean(axis=0)
    centered = vecs - vbar
    cov = (centered.T @ centered) / n
    cov = cov + 1e-6 * (np.trace(cov) / dim) * np.eye(dim)
    params = MatNormParams(
        mean=vbar[:, None],
        sigma_row=cov,
        sigma_col=np.eye(1),
    )
    vec_data = MatrixDataset(vecs[:, :, None], data.responses)
    slices = slice_labels(data.responses, config.slices)
    pinned = np.ones(1)
    directions = []
    convergence = []
    for h, labels in zip(slices.retained, slices.labels):
        direction, solution = update_u(vec_data, labels, pinned, params, lam=config.lam)
        directions.append(direction)
        convergence.append(
            {
                "slice": h,
                "converged": bool(solution.converged),
                "iterations": int(solution.iterations),
                "objective": float(solution.dual_objective),
            }
        )
    agg = np.zeros((dim, dim))
    for direction in directions:
        agg += np.outer(direction, direction)
    w, q = _eigh_descending(agg)
    w = np.maximum(w, 0.0)
    fixed = None if config.dims is None else config.dims[0] * config.dims[1]
    r = _select_rank(w, fixed, n)
    return SubspaceEstimate(
        row_basis=q[:, :r],
        col_basis=np.eye(1),
        eigvals_row=w,
        eigvals_col=np.ones(1),
        selected_dims=(r, 1),
        config=config.to_dict(),
        convergence=convergence,
    )


def reduce(data, estimate):
    """Per-sample reduced coordinates basis' X basis (one contraction per mode)."""
    if isinstance(estimate, TensorSubspaceEstimate):
        if tuple(data.dims) != tuple(b.shape[0] for b in estimate.mode_bases):
            raise ValueError("estimate dimensions do not match the dataset")
        coords = data.samples
        for k, basis in enumerate(estimate.mode_bases):
            coords = np.moveaxis(
                np.tensordot(basis.T, coords, axes=(1, k + 1)), 0, k + 1
            )
        return coords
    if (data.d1, data.d2) != (estimate.row_basis.shape[0], estimate.col_basis.shape[0]):
        raise ValueError("estimate dimensions do not match the dataset")
    return np.einsum(
        "ar,nab,bc->nrc", estimate.row_basis, data.samples, estimate.col_basis
    )


def symmetric_triple(reduced):
    """Scalar features (u1'Xu1, u2'Xu2, u1'Xu2) from symmetric rank-2 coordinates."""
    reduced = np.asarray(reduced)
    if reduced.ndim != 3 or reduced.shape[1:] != (2, 2):
        raise ValueError("symmetric triple needs (n, 2, 2) reduced coordinates")
    return np.column_stack([reduced[:, 0, 0], reduced[:, 1, 1], reduced[:, 0, 1]])
