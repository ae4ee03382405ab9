"""Gaussian model-X knockoffs, lasso-coefficient-difference statistics and
the knockoff p-values built from them."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.linalg

from .linmodel import lasso_fit

PSD_TOL = 1e-10


def ledoit_wolf(Xc):
    """Ledoit-Wolf shrinkage towards ``nu * I``, ``nu = trace(S) / q``.

    Returns ``(sigma, rho)`` where ``S`` is the 1/n empirical covariance and
    ``sigma = (1 - rho) * S + rho * nu * I``. ``rho`` is raised above its
    analytic value only if needed to keep ``sigma`` positive definite.
    """
    n, q = Xc.shape
    Xm = Xc - Xc.mean(axis=0)
    emp = Xm.T @ Xm / n
    nu = np.trace(emp) / q
    X2 = Xm ** 2
    beta_ = np.sum(X2.T @ X2) / n
    delta_ = np.sum(emp ** 2)
    beta = (beta_ - delta_) / (n * q)
    delta = (delta_ - 2.0 * nu * np.trace(emp) + q * nu ** 2) / q
    beta = min(beta, delta)
    rho = 0.0 if delta <= 0 else float(beta / delta)
    rho = min(max(rho, 0.0), 1.0)

    sigma = (1.0 - rho) * emp
    sigma[np.diag_indices(q)] += rho * nu
    lmin = np.linalg.eigvalsh(sigma)[0]
    floor = 1e-8 * nu
    if lmin < floor:
        # smallest rho giving lambda_min >= floor; emp's own lambda_min is lmin_emp
        lmin_emp = np.linalg.eigvalsh(emp)[0]
        rho = float(min(1.0, (floor - lmin_emp) / (nu - lmin_emp)))
        sigma = (1.0 - rho) * emp
        sigma[np.diag_indices(q)] += rho * nu
    return 0.5 * (sigma + sigma.T), rho


def equicorrelated_s(sigma):
    """``s_j = min(2 * lambda_min(corr), 1) * sigma_jj``."""
    d = np.sqrt(np.diag(sigma))
    corr = sigma / np.outer(d, d)
    lmin = np.linalg.eigvalsh(corr)[0]
    return min(2.0 * lmin, 1.0) * np.diag(sigma)


def _conditional_cov(sigma, s):
    S = np.diag(s)
    V = 2.0 * S - S @ np.linalg.solve(sigma, S)
    return 0.5 * (V + V.T)


@dataclass(frozen=True, eq=False)
class KnockoffModel:
    """Fitted Gaussian model for the joint law of ``(X, X_knockoff)``."""

    mu: np.ndarray
    sigma_hat: np.ndarray
    s: np.ndarray
    shrinkage: float = 0.0

    def __post_init__(self):
        q = len(self.mu)
        if self.sigma_hat.shape != (q, q) or self.s.shape != (q,):
            raise ValueError("mu, sigma_hat and s have inconsistent sizes")
        if not np.allclose(self.sigma_hat, self.sigma_hat.T):
            raise ValueError("sigma_hat must be symmetric")
        if np.linalg.eigvalsh(self.sigma_hat)[0] <= 0:
            raise ValueError("sigma_hat must be positive definite")
        if np.any(self.s < 0):
            raise ValueError("s must be nonnegative")
        if np.linalg.eigvalsh(self.conditional_cov)[0] < -PSD_TOL:
            raise ValueError("2 diag(s) - diag(s) sigma^-1 diag(s) is not PSD")

    @property
    def q(self) -> int:
        return len(self.mu)

    @cached_property
    def conditional_cov(self):
        return _conditional_cov(self.sigma_hat, self.s)

    @cached_property
    def _projection(self):
        # sigma^-1 diag(s), so that E[Xk | X] = X - (X - mu) @ projection
        return scipy.linalg.solve(self.sigma_hat, np.diag(self.s), assume_a="pos")

    @cached_property
    def _noise_factor(self):
        vals, vecs = np.linalg.eigh(self.conditional_cov)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def fit_knockoff_model(Xc) -> KnockoffModel:
    """Fit mean, shrunk covariance and equicorrelated ``s`` to ``Xc``.

    ``s`` is scaled down in 0.1% steps until the knockoff conditional
    covariance clears the PSD tolerance; the equicorrelated choice sits
    exactly on that boundary.
    """
    Xc = np.asarray(Xc, dtype=np.float64)
    if Xc.ndim != 2 or Xc.shape[0] < 2:
        raise ValueError("need a 2D design with at least two rows")
    if np.any(np.ptp(Xc, axis=0) == 0):
        raise ValueError("zero-variance column in knockoff design")
    sigma, rho = ledoit_wolf(Xc)
    s = equicorrelated_s(sigma)
    for _ in range(2000):
        if np.linalg.eigvalsh(_conditional_cov(sigma, s))[0] >= -PSD_TOL:
            break
        s = 0.999 * s
    return KnockoffModel(Xc.mean(axis=0), sigma, s, rho)


def sample_knockoffs(model: KnockoffModel, Xc, seed) -> np.ndarray:
    """Draw ``Xk | Xc`` from the Gaussian conditional of the fitted model."""
    Xc = np.asarray(Xc, dtype=np.float64)
    if Xc.ndim != 2 or Xc.shape[1] != model.q:
        raise ValueError(f"design has {Xc.shape[-1]} columns, model expects {model.q}")
    rng = np.random.default_rng(seed)
    E = rng.standard_normal(Xc.shape)
    return Xc - (Xc - model.mu) @ model._projection + E @ model._noise_factor.T


def standardize_pair(Xc, Xk):
    """Center both blocks and divide column j of each by the std of ``Xc[:, j]``."""
    scale = Xc.std(axis=0)
    if np.any(scale == 0):
        raise ValueError("zero-variance column in design")
    return (Xc - Xc.mean(axis=0)) / scale, (Xk - Xk.mean(axis=0)) / scale


@dataclass(frozen=True)
class StatVector:
    z: np.ndarray
    coef: Optional[np.ndarray] = None  # signed lasso coefficients of the original columns
    converged: bool = True

    def __post_init__(self):
        if not np.isfinite(self.z).all():
            raise ValueError("statistics must be finite")


def lcd_statistic(Xc, Xk, y, lam, tol=1e-6, max_iters=1000) -> StatVector:
    """``z_j = |w_j| - |w_{j+q}|`` from a lasso on ``[Xc, Xk]`` at penalty ``lam``.

    The design is used as given; standardize it first (``standardize_pair``).
    """
    Xc = np.asarray(Xc, dtype=np.float64)
    Xk = np.asarray(Xk, dtype=np.float64)
    if Xc.shape != Xk.shape:
        raise ValueError(f"original {Xc.shape} and knockoff {Xk.shape} shapes differ")
    q = Xc.shape[1]
    fit = lasso_fit(np.hstack([Xc, Xk]), y, lam, tol=tol, max_iters=max_iters)
    w = fit.w_hat
    return StatVector(np.abs(w[:q]) - np.abs(w[q:]), w[:q].copy(), fit.converged)


def knockoff_pvalues(z, offset=False) -> np.ndarray:
    """``p_j = #{k : z_k <= -z_j} / q``.

    With ``offset=True`` uses ``(1 + #{...}) / (q + 1)``, which never
    returns zero.
    """
    z = np.asarray(getattr(z, "z", z), dtype=np.float64)
    if z.ndim != 1 or len(z) == 0:
        raise ValueError("need a non-empty statistic vector")
    if not np.isfinite(z).all():
        raise ValueError("statistics must be finite")
    counts = np.searchsorted(np.sort(z), -z, side="right")
    if offset:
        return (1.0 + counts) / (len(z) + 1.0)
    return counts / len(z)
