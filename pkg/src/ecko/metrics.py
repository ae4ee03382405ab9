"""Scoring selections against ground truth, and the SNR benchmark sweep."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.spatial import cKDTree

from .core import GridGeometry, derive_seed
from .pipeline import EckoParams, run_cko, run_ecko
from .simdata import SimulationSpec, generate_synthetic

log = logging.getLogger(__name__)

METHODS = {"ecko": run_ecko, "cko": run_cko}
DEFAULT_SNR_GRID = tuple(2.0 ** k for k in range(-1, 6))
# distances are square roots of integers; absorbs rounding when comparing to delta
DIST_EPS = 1e-9


def fdp(selected, support) -> float:
    selected = np.unique(np.asarray(selected, dtype=np.intp))
    if len(selected) == 0:
        return 0.0
    false = np.setdiff1d(selected, np.asarray(support, dtype=np.intp))
    return len(false) / len(selected)


def nearest_support_distance(selected, support, geometry: GridGeometry) -> np.ndarray:
    """Distance from each selected voxel to its closest support voxel (inf if no support)."""
    selected = np.asarray(selected, dtype=np.intp)
    support = np.asarray(support, dtype=np.intp)
    if len(support) == 0:
        return np.full(len(selected), np.inf)
    tree = cKDTree(geometry.feature_coords[support])
    d, _ = tree.query(geometry.feature_coords[selected])
    return np.asarray(d, dtype=np.float64)


def delta_fdp(selected, support, delta, geometry: GridGeometry) -> float:
    """Fraction of selections farther than ``delta`` from every support voxel."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    selected = np.unique(np.asarray(selected, dtype=np.intp))
    if len(selected) == 0:
        return 0.0
    d = nearest_support_distance(selected, support, geometry)
    return int(np.sum(d > delta + DIST_EPS)) / len(selected)


def precision_recall(selected, support):
    support = np.unique(np.asarray(support, dtype=np.intp))
    if len(support) == 0:
        raise ValueError("support must be non-empty")
    selected = np.unique(np.asarray(selected, dtype=np.intp))
    hits = len(np.intersect1d(selected, support))
    return 1.0 - fdp(selected, support), hits / len(support)


def pr_curve(q_tilde, support, geometry: Optional[GridGeometry] = None):
    """(precision, recall) for ``{k : q_k <= t}`` at every distinct value t of ``q_tilde``,
    in increasing t."""
    q = np.asarray(q_tilde, dtype=np.float64)
    support = np.unique(np.asarray(support, dtype=np.intp))
    if len(support) == 0:
        raise ValueError("support must be non-empty")
    is_true = np.zeros(len(q), dtype=bool)
    is_true[support] = True
    order = np.argsort(q, kind="stable")
    qs = q[order]
    tp = np.cumsum(is_true[order])
    # last position of each distinct threshold
    ends = np.flatnonzero(np.r_[qs[1:] != qs[:-1], True])
    n_sel = ends + 1
    return [(float(tp[e] / s), float(tp[e] / len(support))) for e, s in zip(ends, n_sel)]


def pr_auc(points) -> float:
    """Step-wise area: sum of precision times recall increments, starting from recall 0."""
    area, last = 0.0, 0.0
    for prec, rec in points:
        area += prec * (rec - last)
        last = rec
    return area


def jaccard(a, b) -> float:
    a, b = set(np.asarray(a).tolist()), set(np.asarray(b).tolist())
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


@dataclass
class Record:
    method: str
    snr: float
    seed: int
    fdp: float = float("nan")
    delta_fdp: float = float("nan")
    precision: float = float("nan")
    recall: float = float("nan")
    delta: float = float("nan")
    n_selected: int = 0
    auc: float = float("nan")
    runtime: float = float("nan")
    error: str = ""
    selected: Optional[np.ndarray] = field(default=None, repr=False)


RECORD_COLUMNS = ["method", "snr", "seed", "fdp", "delta_fdp", "precision", "recall",
                  "delta", "n_selected", "auc", "runtime", "error"]
STAT_COLUMNS = ["fdp", "delta_fdp", "precision", "recall", "delta", "n_selected", "auc"]


@dataclass
class BenchmarkReport:
    records: List[Record]

    def ok_records(self):
        return [r for r in self.records if not r.error]

    def aggregate(self) -> List[Dict]:
        """Mean and standard error of every statistic per (method, snr)."""
        groups: Dict = {}
        for r in self.ok_records():
            groups.setdefault((r.method, r.snr), []).append(r)
        rows = []
        for (method, snr), recs in sorted(groups.items()):
            row = {"method": method, "snr": snr, "n": len(recs)}
            for col in STAT_COLUMNS:
                vals = np.array([getattr(r, col) for r in recs], dtype=np.float64)
                row[f"{col}_mean"] = float(vals.mean())
                row[f"{col}_se"] = float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0
            rows.append(row)
        return rows

    def select(self, method, snr=None):
        return [r for r in self.records if r.method == method and (snr is None or r.snr == snr)]


def score_run(method, snr, seed, result, trace, truth, geometry, runtime) -> Record:
    support = truth.support
    sel = result.selected
    rec = Record(method, float(snr), int(seed), runtime=runtime, selected=sel)
    rec.delta = trace.delta
    rec.fdp = fdp(sel, support)
    rec.delta_fdp = delta_fdp(sel, support, trace.delta, geometry)
    rec.n_selected = len(sel)
    if len(support):
        rec.precision, rec.recall = precision_recall(sel, support)
        rec.auc = pr_auc(pr_curve(result.q_tilde, support))
    return rec


def dataset_seed(base_seed, snr_index, seed_index):
    return derive_seed(base_seed, [snr_index, seed_index])


def run_seed_cell(args):
    """One benchmark cell: simulate, then run every method on the same data."""
    methods, snr_index, snr, seed_index, base_spec, params = args
    spec = base_spec.replace(target_snr=float(snr), seed=dataset_seed(base_spec.seed, snr_index, seed_index))
    dataset, truth = generate_synthetic(spec)
    run_params = params.replace(master_seed=derive_seed(params.master_seed, [snr_index, seed_index]))
    out = []
    for method in methods:
        t0 = time.perf_counter()
        try:
            result, trace = METHODS[method](dataset, run_params)
        except Exception as exc:  # recorded, not fatal
            log.warning("cell (%s, snr=%g, seed=%d) failed: %s", method, snr, seed_index, exc)
            out.append(Record(method, float(snr), seed_index, error=str(exc)))
            continue
        out.append(score_run(method, snr, seed_index, result, trace, truth, dataset.geometry,
                             time.perf_counter() - t0))
    return out


def snr_sweep(methods, snr_grid, n_seeds, base_spec: SimulationSpec, params: EckoParams,
              n_jobs: int = 1) -> BenchmarkReport:
    """Score every method at every SNR on ``n_seeds`` simulated datasets.

    Methods share the dataset of each (snr, seed) cell. Records come back
    sorted by (method, snr, seed) whatever ``n_jobs`` is.
    """
    methods = list(methods)
    snr_grid = list(snr_grid)
    if not methods or not snr_grid or n_seeds < 1:
        raise ValueError("methods, snr_grid and n_seeds must be non-empty")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    cells = [(methods, i, snr, s, base_spec, params)
             for i, snr in enumerate(snr_grid) for s in range(n_seeds)]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            chunks = list(pool.map(run_seed_cell, cells))
    else:
        chunks = [run_seed_cell(cell) for cell in cells]
    records = [r for chunk in chunks for r in chunk]
    order = {m: i for i, m in enumerate(methods)}
    records.sort(key=lambda r: (order[r.method], r.snr, r.seed))
    return BenchmarkReport(records)


def record_row(rec: Record, timing=False) -> Dict:
    row = asdict(rec)
    row.pop("selected")
    if not timing:
        row.pop("runtime")
    return row
