"""Ensemble of clustered knockoffs, end to end, and its single-clustering
baseline (CKO)."""
from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .cluster import (
    Clustering,
    broadcast_qvalues,
    max_diameter,
    reduce_features,
    subsample_rows,
    ward_cluster,
)
from .core import Dataset, SelectionResult, derive_seed
from .knockoff import (
    fit_knockoff_model,
    knockoff_pvalues,
    lcd_statistic,
    sample_knockoffs,
    standardize_pair,
)
from .linmodel import lasso_cv_lambda
from .multtest import bhq_qvalues, quantile_aggregate, threshold_select

CV_LABEL = -1  # seed label for the per-clustering penalty search


class ClusteringFailure(RuntimeError):
    """Raised when one clustering of the ensemble cannot be processed."""

    def __init__(self, c, cause):
        super().__init__(f"clustering c={c} failed: {cause}")
        self.c = c


@dataclass(frozen=True)
class EckoParams:
    n_clusters: int = 500
    n_draws: int = 25
    n_clusterings: int = 25
    alpha: float = 0.1
    gamma: float = 0.5
    subsample_fraction: float = 0.7
    master_seed: int = 0
    # per-sample lasso penalty; None selects it by cross-validation
    lasso_penalty: Optional[float] = None
    cv_folds: int = 5
    cv_grid_size: int = 20
    pvalue_offset: bool = False

    def __post_init__(self):
        if self.n_clusters < 1 or self.n_draws < 1 or self.n_clusterings < 1:
            raise ValueError("n_clusters, n_draws and n_clusterings must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0 < self.subsample_fraction <= 1:
            raise ValueError("subsample_fraction must lie in (0, 1]")
        if self.lasso_penalty is not None and not self.lasso_penalty > 0:
            raise ValueError("lasso_penalty must be positive")

    def replace(self, **changes) -> "EckoParams":
        return dataclasses.replace(self, **changes)


@dataclass
class ClusteringRun:
    """Everything computed for one clustering ``c``."""

    clustering: Clustering
    rows: np.ndarray
    lam: float
    z: np.ndarray  # (B, q)
    coef: np.ndarray  # (B, q) signed lasso coefficients of the original columns
    pvals: np.ndarray  # (B, q)
    p_agg: np.ndarray  # (q,)
    q_cluster: np.ndarray  # (q,)
    q_voxel: np.ndarray  # (p,)
    converged: np.ndarray  # (B,) bool


@dataclass
class EckoTrace:
    params: EckoParams
    runs: List[ClusteringRun] = field(default_factory=list)
    q_tilde: Optional[np.ndarray] = None
    delta: float = 0.0

    @property
    def clusterings(self) -> List[Clustering]:
        return [r.clustering for r in self.runs]


def _standardize_columns(X):
    Xm = X - X.mean(axis=0)
    scale = Xm.std(axis=0)
    scale[scale == 0] = 1.0
    return Xm / scale


def _run_clustering(dataset: Dataset, yc, params: EckoParams, c: int) -> ClusteringRun:
    X = dataset.X
    n = dataset.n
    rows = subsample_rows(n, params.subsample_fraction, derive_seed(params.master_seed, [c]))
    clustering = ward_cluster(_standardize_columns(X[rows]), dataset.geometry, params.n_clusters)
    Xr = reduce_features(X, clustering)
    model = fit_knockoff_model(Xr)

    B, q = params.n_draws, params.n_clusters
    z = np.empty((B, q))
    coef = np.empty((B, q))
    pvals = np.empty((B, q))
    converged = np.empty(B, dtype=bool)
    lam = None
    for b in range(B):
        Xk = sample_knockoffs(model, Xr, derive_seed(params.master_seed, [c, b]))
        D, Dk = standardize_pair(Xr, Xk)
        if lam is None:
            penalty = params.lasso_penalty
            if penalty is None:
                penalty = lasso_cv_lambda(
                    np.hstack([D, Dk]), yc, params.cv_folds, params.cv_grid_size,
                    seed=derive_seed(params.master_seed, [c, CV_LABEL]),
                )
            lam = n * penalty
        stat = lcd_statistic(D, Dk, yc, lam)
        z[b], coef[b], converged[b] = stat.z, stat.coef, stat.converged
        pvals[b] = knockoff_pvalues(stat.z, offset=params.pvalue_offset)

    # one draw is the plain knockoff procedure; aggregation only pays off for B > 1
    p_agg = pvals[0].copy() if B == 1 else quantile_aggregate(pvals, params.gamma)
    q_cluster = bhq_qvalues(p_agg)
    return ClusteringRun(
        clustering, rows, float(lam), z, coef, pvals, p_agg, q_cluster,
        broadcast_qvalues(q_cluster, clustering), converged,
    )


def _guarded(dataset, yc, params, c):
    try:
        return _run_clustering(dataset, yc, params, c)
    except Exception as exc:
        raise ClusteringFailure(c, exc) from exc


def run_ecko(dataset: Dataset, params: EckoParams, threads: int = 1):
    """Run the full ensemble; returns ``(SelectionResult, EckoTrace)``.

    Every clustering ``c`` draws its subsample from
    ``derive_seed(master_seed, [c])`` and knockoff draw ``b`` from
    ``derive_seed(master_seed, [c, b])``, so the result does not depend on
    ``threads``.
    """
    if dataset.geometry is None:
        raise ValueError("dataset has no grid geometry")
    if params.n_clusters > dataset.p:
        raise ValueError(f"n_clusters={params.n_clusters} exceeds p={dataset.p}")
    yc = dataset.y - dataset.y.mean()
    cs = range(params.n_clusterings)
    if threads > 1 and params.n_clusterings > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(lambda c: _guarded(dataset, yc, params, c), cs))
    else:
        runs = [_guarded(dataset, yc, params, c) for c in cs]

    total = np.zeros(dataset.p)
    for run in runs:
        total += run.q_voxel
    q_tilde = total / len(runs)

    trace = EckoTrace(params, runs, q_tilde, max_diameter(r.clustering for r in runs))
    return select(trace, params.alpha), trace


def select(trace: EckoTrace, alpha: float) -> SelectionResult:
    """Threshold the trace's aggregated q-values at ``alpha`` and vote signs."""
    selected = threshold_select(trace.q_tilde, alpha)
    return SelectionResult(trace.q_tilde, selected, sign_vote(trace, selected), alpha)


def sign_vote(trace: EckoTrace, selected) -> np.ndarray:
    """Majority sign of the enclosing cluster's coefficient over all (b, c).

    Zero coefficients abstain; an exact tie gives 0, as does every voxel
    outside ``selected``.
    """
    votes = np.zeros(len(trace.q_tilde), dtype=np.int64)
    for run in trace.runs:
        per_cluster = np.sign(run.coef).astype(np.int64).sum(axis=0)
        votes += per_cluster[run.clustering.assignment]
    signs = np.zeros(len(votes), dtype=np.int8)
    selected = np.asarray(selected, dtype=np.intp)
    signs[selected] = np.sign(votes[selected])
    return signs


def run_cko(dataset: Dataset, params: EckoParams, threads: int = 1):
    """Single clustering, single knockoff draw."""
    return run_ecko(dataset, params.replace(n_clusterings=1, n_draws=1), threads=threads)
