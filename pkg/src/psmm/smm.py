"""Rank-1 support matrix machine and its order-K tensor analogue.

The fitted objective is

    prod_k (u_k' Sigma_k u_k) + (lambda/n) sum_i {1 - y_i (<X_i - mean, u_1 o ... o u_K> - t)}_+

(for matrices: (u' Sigma_r u)(v' Sigma_c v) plus the hinge sum over
u'(X_i - mean)v - t).  The objective is convex in each direction with the
others fixed, so it is minimized by cyclic coordinate descent; every mode
subproblem is a linear SVM whose dual is solved exactly, and the
intercept t is re-derived from the dual's KKT conditions after every
direction update.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDirection
from .qp import SvmDualProblem, solve_svm_dual

_MODE_LETTERS = "abcdefghijklmnopqrstuvwxy"  # 'z' is reserved for the sample axis
_ZERO_NORM = 1e-30


@dataclass(eq=False)
class DirectionTriple:
    """One fitted (u, v, t) with its objective and convergence metadata.

    Finalized triples are norm-balanced (||u|| = ||v||); balancing rescales
    u and v reciprocally, so decision values u' X v are unchanged.
    """

    u: np.ndarray
    v: np.ndarray
    t: float
    objective: float
    iterations: int
    converged: bool


@dataclass(eq=False)
class TensorDirectionSet:
    """Per-mode directions (all norms equal after balancing) plus intercept."""

    us: list
    t: float
    objective: float
    iterations: int
    converged: bool


def _check_labels(labels, n):
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ValueError(f"labels must have shape ({n},)")
    if not np.all(np.isin(labels, (-1, 1))):
        raise ValueError("labels must take values in {-1, +1}")
    return labels.astype(np.float64)


def mode_k_contract(tensor, vectors, skip=None):
    """Contract a tensor with one vector per mode.

    Without ``skip`` the full contraction returns a scalar; with
    ``skip = k`` the contraction runs over all other modes and returns a
    vector of length d_k (the entry of ``vectors`` at position k is
    ignored and may be None).
    """
    tensor = np.asarray(tensor, dtype=np.float64)
    order = tensor.ndim
    if len(vectors) != order:
        raise ValueError(f"expected {order} vectors, got {len(vectors)}")
    operands = [tensor]
    subs = [_MODE_LETTERS[:order]]
    for mode in range(order):
        if mode == skip:
            continue
        vec = np.asarray(vectors[mode], dtype=np.float64)
        if vec.shape != (tensor.shape[mode],):
            raise ValueError(
                f"vector for mode {mode} has shape {vec.shape}, "
                f"expected ({tensor.shape[mode]},)"
            )
        operands.append(vec)
        subs.append(_MODE_LETTERS[mode])
    out = "" if skip is None else _MODE_LETTERS[skip]
    result = np.einsum(",".join(subs) + "->" + out, *operands)
    return float(result) if skip is None else result


def _batch_contract(centered, vectors, skip=None):
    """Contract every sample in a (n, d1, ..., dK) batch; see mode_k_contract."""
    order = centered.ndim - 1
    operands = [centered]
    subs = ["z" + _MODE_LETTERS[:order]]
    for mode in range(order):
        if mode == skip:
            continue
        operands.append(np.asarray(vectors[mode], dtype=np.float64))
        subs.append(_MODE_LETTERS[mode])
    out = "z" + ("" if skip is None else _MODE_LETTERS[skip])
    return np.einsum(",".join(subs) + "->" + out, *operands)


def _objective_core(centered, us, t, labels, sigmas, lam):
    n = centered.shape[0]
    decisions = _batch_contract(centered, us)
    hinge = np.maximum(0.0, 1.0 - labels * (decisions - t)).sum()
    quad = 1.0
    for u, sigma in zip(us, sigmas):
        quad *= float(u @ sigma @ u)
    return quad + (lam / n) * float(hinge)


def objective_eval(u, v, t, data, labels, params, lam):
    """Sample objective at (u, v, t); centering uses the fitted mean."""
    labels = _check_labels(labels, data.n)
    centered = data.samples - params.mean
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return _objective_core(
        centered, (u, v), t, labels, (params.sigma_row, params.sigma_col), lam
    )


def objective_eval_tensor(us, t, data, labels, params, lam):
    """Order-K sample objective; the K = 2 case equals objective_eval."""
    labels = _check_labels(labels, data.n)
    centered = data.samples - params.mean
    us = [np.asarray(u, dtype=np.float64) for u in us]
    return _objective_core(centered, us, t, labels, params.sigmas, lam)


def _linear_subproblem(feats, labels, inv_mat, scale, lam, qp_tol, warm_alphas):
    """Minimize over one direction with the others fixed.

    ``feats`` holds the centered samples contracted over every other mode;
    ``scale`` is the product of the quadratic forms of the fixed
    directions.  The dual kernel uses the (i, j) cross products
    feats_i' Sigma^{-1} feats_j / scale (a diagonal-only form would not
    define a quadratic form), and the minimizer is
    (1/2) sum_i alpha_i y_i Sigma^{-1} feats_i / scale.
    """
    n = feats.shape[0]
    white = feats @ inv_mat
    kernel = (feats @ white.T) / scale
    problem = SvmDualProblem(kernel=kernel, labels=labels, box=lam / n, tol=qp_tol)
    solution = solve_svm_dual(problem, warm_alphas=warm_alphas)
    direction = white.T @ (0.5 * solution.alphas * labels) / scale
    return direction, solution


def update_u(data, labels, v, params, lam, qp_tol=1e-8, warm_alphas=None):
    """Exact minimizer over u for fixed v, with the dual alphas."""
    labels = _check_labels(labels, data.n)
    v = np.asarray(v, dtype=np.float64)
    scale = float(v @ params.sigma_col @ v)
    if not scale > 0.0:
        raise DegenerateDirection("fixed direction v has v' Sigma_c v <= 0")
    centered = data.samples - params.mean
    feats = centered @ v
    return _linear_subproblem(
        feats, labels, params.row_inv, scale, lam, qp_tol, warm_alphas
    )


def update_v(data, labels, u, params, lam, qp_tol=1e-8, warm_alphas=None):
    """Exact minimizer over v for fixed u; the transpose of update_u."""
    labels = _check_labels(labels, data.n)
    u = np.asarray(u, dtype=np.float64)
    scale = float(u @ params.sigma_row @ u)
    if not scale > 0.0:
        raise DegenerateDirection("fixed direction u has u' Sigma_r u <= 0")
    centered = data.samples - params.mean
    feats = np.einsum("nij,i->nj", centered, u)
    return _linear_subproblem(
        feats, labels, params.col_inv, scale, lam, qp_tol, warm_alphas
    )


def _sign_fix(vec):
    idx = int(np.argmax(np.abs(vec)))
    return -vec if vec[idx] < 0 else vec


def _unfold(tensor, mode):
    return np.moveaxis(tensor, mode, 0).reshape(tensor.shape[mode], -1)


def _init_tensor(centered, labels, tparams):
    """Deterministic starting directions from the whitened class-mean gap.

    Uses the per-mode leading left singular vectors of the whitened signed
    mean difference, mapped back through the inverse square roots; when
    the gap vanishes, falls back to the leading eigenvectors of the
    covariance factors.
    """
    order = centered.ndim - 1
    shape = (slice(None),) + (None,) * order
    delta = (labels[shape] * centered).mean(axis=0)
    whitened = delta
    for k in range(order):
        whitened = np.tensordot(tparams.factor_inv_sqrt(k), whitened, axes=(1, k))
        whitened = np.moveaxis(whitened, 0, k)
    data_scale = float(np.sqrt((centered**2).sum() / centered.shape[0]))
    if float(np.sqrt((whitened**2).sum())) <= 1e-13 * max(data_scale, 1e-300):
        out = []
        for k in range(order):
            w, v = tparams._eighs[k]
            out.append(_sign_fix(v[:, -1].copy()))
        return out
    out = []
    for k in range(order):
        mat = _unfold(whitened, k)
        left = np.linalg.svd(mat, full_matrices=False)[0][:, 0]
        out.append(_sign_fix(tparams.factor_inv_sqrt(k) @ left))
    return out


def init_directions(data, labels, params):
    """Starting (u0, v0) for the matrix descent; see _init_tensor."""
    labels = _check_labels(labels, data.n)
    centered = data.samples - params.mean
    u0, v0 = _init_tensor(centered, labels, params.to_tensor())
    return u0, v0


def _balance(us):
    norms = [float(np.linalg.norm(u)) for u in us]
    if min(norms) <= _ZERO_NORM:
        return [np.zeros_like(u) for u in us]
    target = float(np.prod(norms)) ** (1.0 / len(us))
    return [u * (target / norm) for u, norm in zip(us, norms)]


def _fit_core(centered, labels, tparams, lam, tol, max_iter, restarts, seed):
    """Cyclic coordinate descent over the mode directions, best of several starts."""
    n = centered.shape[0]
    dims = centered.shape[1:]
    order = len(dims)
    if min(int((labels > 0).sum()), int((labels < 0).sum())) < 2:
        raise ValueError("each label class needs at least two samples")
    sigmas = tparams.sigmas
    invs = [tparams.factor_inv(k) for k in range(order)]

    starts = [_init_tensor(centered, labels, tparams)]
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        vecs = []
        for d in dims:
            g = rng.standard_normal(d)
            vecs.append(g / np.linalg.norm(g))
        starts.append(vecs)
    for vecs in starts:
        if any(np.linalg.norm(u) <= _ZERO_NORM for u in vecs):
            raise DegenerateDirection("initialization produced a zero direction")

    best = None
    for start in starts:
        us = [u.copy() for u in start]
        t = 0.0
        objective = _objective_core(centered, us, t, labels, sigmas, lam)
        warm = [None] * order
        converged = False
        degenerate = False
        sweeps = 0
        for sweep in range(1, max_iter + 1):
            sweeps = sweep
            for k in range(order):
                scale = 1.0
                for j in range(order):
                    if j != k:
                        scale *= float(us[j] @ sigmas[j] @ us[j])
                if not (np.isfinite(scale) and scale > 0.0):
                    degenerate = True
                    break
                feats = _batch_contract(centered, us, skip=k)
                direction, solution = _linear_subproblem(
                    feats, labels, invs[k], scale, lam, 1e-8, warm[k]
                )
                warm[k] = solution.alphas
                us[k] = direction
                t = solution.bias_t
                if np.linalg.norm(direction) <= _ZERO_NORM:
                    degenerate = True
                    break
            new_objective = _objective_core(centered, us, t, labels, sigmas, lam)
            if degenerate:
                converged = True
                objective = new_objective
                break
            if objective - new_objective <= tol * max(objective, 1e-30):
                converged = True
                objective = new_objective
                break
            objective = new_objective
        us = _balance(us)
        objective = _objective_core(centered, us, t, labels, sigmas, lam)
        if best is None or objective < best[0]:
            best = (objective, us, t, sweeps, converged)

    objective, us, t, sweeps, converged = best
    return us, float(t), float(objective), sweeps, converged


def fit_rank1_smm(data, labels, params, lam, tol=1e-6, max_iter=100, restarts=2, seed=0):
    """Fit the rank-1 machine by alternating u and v updates.

    Runs the deterministic initializer plus ``restarts`` seeded random
    unit-vector starts and returns the lowest-objective triple,
    norm-balanced.  Sweeps stop when the relative objective decrease
    falls below ``tol``; exhausting ``max_iter`` tags the triple
    unconverged.
    """
    labels = _check_labels(labels, data.n)
    if (data.d1, data.d2) != (params.d1, params.d2):
        raise ValueError("parameter dimensions do not match the dataset")
    centered = data.samples - params.mean
    us, t, objective, sweeps, converged = _fit_core(
        centered, labels, params.to_tensor(), lam, tol, max_iter, restarts, seed
    )
    return DirectionTriple(
        u=us[0], v=us[1], t=t, objective=objective, iterations=sweeps, converged=converged
    )


def fit_rank1_stm(data, labels, params, lam, tol=1e-6, max_iter=100, restarts=2, seed=0):
    """Order-K analogue of fit_rank1_smm with cyclic mode updates."""
    labels = _check_labels(labels, data.n)
    if tuple(data.dims) != tuple(params.dims):
        raise ValueError("parameter dimensions do not match the dataset")
    centered = data.samples - params.mean
    us, t, objective, sweeps, converged = _fit_core(
        centered, labels, params, lam, tol, max_iter, restarts, seed
    )
    return TensorDirectionSet(
        us=us, t=t, objective=objective, iterations=sweeps, converged=converged
    )
