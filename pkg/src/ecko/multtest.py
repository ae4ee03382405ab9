"""Quantile aggregation of p-values, Benjamini-Hochberg q-values and thresholding."""
import math
from fractions import Fraction

import numpy as np


def _check_unit(a, what):
    a = np.asarray(a, dtype=np.float64)
    if np.any(~np.isfinite(a)) or np.any(a < 0) or np.any(a > 1):
        raise ValueError(f"{what} must lie in [0, 1]")
    return a


def quantile_aggregate(pvals, gamma=0.5) -> np.ndarray:
    """Aggregate a (B, q) matrix of p-values column-wise.

    Returns ``min(1, Q_gamma(p / gamma))`` where ``Q_gamma`` is the lower
    empirical quantile: the order statistic of rank ``ceil(gamma * B)``.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    P = _check_unit(np.atleast_2d(pvals), "p-values")
    B = P.shape[0]
    if B < 1:
        raise ValueError("need at least one row of p-values")
    rank = max(math.ceil(gamma * B), 1)
    order_stat = np.partition(P, rank - 1, axis=0)[rank - 1]
    return np.minimum(1.0, order_stat / gamma)


def _round_up(x: Fraction) -> float:
    # smallest double >= x, so that q <= alpha iff x <= alpha for every double alpha
    f = float(x)
    return float(np.nextafter(f, np.inf)) if Fraction(f) < x else f


def bhq_qvalues(pvals) -> np.ndarray:
    """Benjamini-Hochberg adjusted p-values (q-values).

    ``q_(i) = min_{k >= i} m * p_(k) / k`` on the ascending order, capped
    at 1, so that ``{j : q_j <= alpha}`` is the step-up rejection set at
    every level alpha. Each ratio is evaluated exactly and rounded up, which
    keeps that equivalence exact on the boundary ``p_(k) = k * alpha / m``.
    """
    p = _check_unit(pvals, "p-values")
    if p.ndim != 1:
        raise ValueError("expected a 1D p-value vector")
    m = len(p)
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    scaled = np.array([_round_up(Fraction(v) * m / k) for k, v in enumerate(p[order].tolist(), 1)])
    adjusted = np.minimum.accumulate(scaled[::-1])[::-1]
    q = np.empty(m)
    q[order] = np.minimum(adjusted, 1.0)
    return q


def threshold_select(qvals, alpha) -> np.ndarray:
    """Indices ``j`` with ``q_j <= alpha``."""
    return np.flatnonzero(np.asarray(qvals) <= alpha)
