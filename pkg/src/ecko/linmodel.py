"""Lasso by cyclic coordinate descent and K-fold choice of the penalty.

``lasso_fit`` minimises ``0.5 * ||y - D w||^2 + lam * ||w||_1`` (no 1/n).
``lasso_cv_lambda`` works on the per-sample scale
``(1 / 2n) ||y - D w||^2 + alpha * ||w||_1``; the equivalent ``lasso_fit``
penalty for ``n`` rows is ``lam = n * alpha``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend


@dataclass(frozen=True)
class LassoFit:
    w_hat: np.ndarray
    lam: float
    n_iters: int
    converged: bool
    kkt_violation: float
    objective_trace: np.ndarray  # objective before the first sweep and after each sweep


def _check_design(design, y):
    D = np.asarray(design, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if D.ndim != 2 or y.shape != (D.shape[0],):
        raise ValueError(f"design {D.shape} and response {y.shape} do not conform")
    if not (np.isfinite(D).all() and np.isfinite(y).all()):
        raise ValueError("design and response must be finite")
    if D.shape[0] and np.any(np.ptp(D, axis=0) == 0):
        bad = np.flatnonzero(np.ptp(D, axis=0) == 0)
        raise ValueError(f"zero-variance design column(s): {bad[:5].tolist()}")
    return D, y


def _fit_gram(G, c, yy, lam, w0, tol, max_iters):
    w = np.zeros(len(c)) if w0 is None else np.array(w0, dtype=np.float64)
    trace = np.empty(max_iters + 1)
    n_iters, converged, viol = _backend.cd_lasso_gram(
        G, c, float(yy), float(lam), w, float(tol), int(max_iters), trace
    )
    return LassoFit(w, float(lam), int(n_iters), bool(converged), float(viol), trace[: n_iters + 1])


def lasso_fit(design, y, lam, tol=1e-6, max_iters=1000, w0=None) -> LassoFit:
    """Solve the lasso by cyclic coordinate descent.

    Convergence means the largest per-coordinate KKT violation, computed
    from a freshly evaluated correlation ``D^T (y - D w)``, is at most
    ``tol``. Columns are expected standardized and ``y`` centered; only
    constant columns are rejected.
    """
    D, y = _check_design(design, y)
    if not lam > 0:
        raise ValueError("lam must be positive")
    G = np.ascontiguousarray(D.T @ D)
    c = np.ascontiguousarray(D.T @ y)
    return _fit_gram(G, c, y @ y, lam, w0, tol, max_iters)


def kkt_violation(design, y, w, lam) -> float:
    """Largest per-coordinate violation of the lasso optimality conditions."""
    r = np.asarray(design).T @ (np.asarray(y) - np.asarray(design) @ w)
    viol = np.where(w > 0, np.abs(r - lam), np.where(w < 0, np.abs(r + lam), np.abs(r) - lam))
    return float(max(viol.max(initial=0.0), 0.0))


def lambda_grid(design, y, grid_size=20):
    """Descending log grid over ``[alpha_max / 1000, alpha_max]``, per-sample scale."""
    alpha_max = np.max(np.abs(design.T @ y)) / len(y)
    return alpha_max * np.logspace(0, -3, grid_size)


def lasso_cv_lambda(design, y, n_folds=5, grid_size=20, seed=0, tol=1e-4, max_iters=1000) -> float:
    """Penalty (per-sample scale) minimising mean held-out squared error.

    Folds come from a seeded permutation of the rows; each fold walks the
    grid from the largest penalty down with warm starts. Ties go to the
    larger penalty. A zero response returns ``1.0``, as any penalty is
    then optimal.
    """
    D, y = _check_design(design, y)
    n = len(y)
    if n_folds < 2:
        raise ValueError("need at least two folds")
    if n < n_folds:
        raise ValueError(f"{n} samples cannot be split into {n_folds} folds")
    grid = lambda_grid(D, y, grid_size)
    if grid[0] == 0:
        return 1.0

    perm = np.random.default_rng(seed).permutation(n)
    errors = np.zeros(grid_size)
    for test in np.array_split(perm, n_folds):
        train = np.setdiff1d(perm, test)
        Dt, yt = D[train], y[train]
        G = np.ascontiguousarray(Dt.T @ Dt)
        c = np.ascontiguousarray(Dt.T @ yt)
        yy = yt @ yt
        w = None
        for i, alpha in enumerate(grid):
            fit = _fit_gram(G, c, yy, len(train) * alpha, w, tol, max_iters)
            w = fit.w_hat
            resid = y[test] - D[test] @ w
            errors[i] += resid @ resid / len(test)
    return float(grid[int(np.argmin(errors / n_folds))])
