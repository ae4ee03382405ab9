"""Command-line front end: ``ecko simulate | infer | benchmark``.

Datasets on disk are a JSON manifest next to raw little-endian float64
arrays (``X`` row-major) and a bit-packed mask. Exit codes: 0 success,
1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import _backend
from .core import Dataset, GridGeometry, GroundTruth
from .metrics import DEFAULT_SNR_GRID, METHODS, RECORD_COLUMNS, record_row, snr_sweep
from .pipeline import ClusteringFailure, EckoParams
from .simdata import SimulationSpec, generate_synthetic

log = logging.getLogger("ecko")

FORMAT_NAME = "ecko-dataset"
FORMAT_VERSION = 1
THREADS_ENV = "ECKO_THREADS"

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class DataError(ValueError):
    """Missing, corrupt or inconsistent input data."""


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- file formats

def _write_array(path: Path, a) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    path.write_bytes(a.tobytes())
    return {"path": path.name, "shape": list(a.shape)}


def write_dataset(out_dir, dataset: Dataset, truth: GroundTruth = None, extra=None) -> Path:
    """Write ``dataset`` (and optional ground truth) under ``out_dir``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    geom = dataset.geometry
    if geom is None:
        raise DataError("only datasets with a grid geometry can be written")
    (out / "mask.bin").write_bytes(np.packbits(geom.mask.ravel()).tobytes())
    manifest = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "n": dataset.n,
        "p": dataset.p,
        "shape": list(geom.shape),
        "dtype": "float64",
        "byte_order": "little",
        "mask": {"path": "mask.bin", "encoding": "packbits", "bit_order": "big"},
        "arrays": {
            "X": _write_array(out / "X.bin", dataset.X),
            "y": _write_array(out / "y.bin", dataset.y),
        },
    }
    if truth is not None:
        gt = {"sigma": float(truth.sigma), "w_star": _write_array(out / "w_star.bin", truth.w_star)}
        if truth.noise is not None:
            gt["noise"] = _write_array(out / "noise.bin", truth.noise)
        manifest["ground_truth"] = gt
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _read_array(base: Path, entry, expected_shape):
    try:
        path = base / entry["path"]
        shape = tuple(entry["shape"])
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed array entry {entry!r}") from exc
    if shape != tuple(expected_shape):
        raise DataError(f"{path.name}: declared shape {shape}, expected {tuple(expected_shape)}")
    if not path.is_file():
        raise DataError(f"missing array file {path}")
    raw = path.read_bytes()
    if len(raw) != 8 * math.prod(shape):
        raise DataError(f"{path.name}: {len(raw)} bytes, expected {8 * math.prod(shape)} for shape {shape}")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)


def read_dataset(manifest_path):
    """Load ``(Dataset, GroundTruth or None)`` from a manifest, validating sizes exactly."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text())
    except FileNotFoundError as exc:
        raise DataError(f"manifest not found: {manifest_path}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"manifest {manifest_path} is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict) or manifest.get("format") != FORMAT_NAME:
        raise DataError(f"{manifest_path} is not an {FORMAT_NAME} manifest")
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported format_version {manifest.get('format_version')!r}")
    if manifest.get("dtype") != "float64" or manifest.get("byte_order") != "little":
        raise DataError("only little-endian float64 arrays are supported")
    base = manifest_path.parent
    try:
        n, p, shape = int(manifest["n"]), int(manifest["p"]), tuple(manifest["shape"])
        mask_entry, arrays = manifest["mask"], manifest["arrays"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"manifest missing field: {exc}") from exc

    if mask_entry.get("encoding") != "packbits" or mask_entry.get("bit_order", "big") != "big":
        raise DataError("mask must be packbits with big bit order")
    mask_path = base / mask_entry["path"]
    if not mask_path.is_file():
        raise DataError(f"missing mask file {mask_path}")
    n_vox = math.prod(shape)
    packed = mask_path.read_bytes()
    if len(packed) != (n_vox + 7) // 8:
        raise DataError(f"mask has {len(packed)} bytes, expected {(n_vox + 7) // 8}")
    mask = np.unpackbits(np.frombuffer(packed, dtype=np.uint8))[:n_vox].astype(bool).reshape(shape)
    try:
        geometry = GridGeometry(shape, mask)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    if geometry.n_features != p:
        raise DataError(f"mask has {geometry.n_features} active voxels, manifest declares p={p}")

    X = _read_array(base, arrays.get("X"), (n, p))
    y = _read_array(base, arrays.get("y"), (n,))
    try:
        dataset = Dataset(X, y, geometry)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    truth = None
    gt = manifest.get("ground_truth")
    if gt:
        w = _read_array(base, gt["w_star"], (p,))
        noise = _read_array(base, gt["noise"], (n,)) if "noise" in gt else None
        truth = GroundTruth(w, float(gt["sigma"]), noise)
    return dataset, truth


def write_selection_table(path, result, geometry: GridGeometry):
    """One row per selected voxel: index, x, y, z, q_tilde, sign."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "x", "y", "z", "q_tilde", "sign"])
        for k in result.selected:
            x, y, z = (int(v) for v in geometry.feature_coords[k])
            w.writerow([int(k), x, y, z, repr(float(result.q_tilde[k])), int(result.signs[k])])


def read_selection_table(path):
    with open(path, newline="") as fh:
        return [
            {"index": int(r["index"]), "x": int(r["x"]), "y": int(r["y"]), "z": int(r["z"]),
             "q_tilde": float(r["q_tilde"]), "sign": int(r["sign"])}
            for r in csv.DictReader(fh)
        ]


# ---------------------------------------------------------------- argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _shape(text):
    try:
        dims = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"shape must be three comma-separated integers, got {text!r}")
    if len(dims) != 3 or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"shape must be three positive integers, got {text!r}")
    return dims


def _open_unit(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1, got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _float_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("grid must not be empty")
    return vals


def _methods(text):
    vals = [v.strip() for v in text.split(",") if v.strip()]
    bad = [v for v in vals if v not in METHODS]
    if not vals or bad:
        raise argparse.ArgumentTypeError(f"methods must be a non-empty subset of {sorted(METHODS)}")
    return vals


def _default_threads():
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return os.cpu_count() or 1


def _add_inference_flags(p, clusters, draws, clusterings):
    p.add_argument("--fdr", type=_open_unit, default=0.1, help="nominal FDR level in (0,1) (default: %(default)s)")
    p.add_argument("--n-clusters", type=_positive_int, default=clusters, help="clusters per clustering (default: %(default)s)")
    p.add_argument("--n-draws", type=_positive_int, default=draws, help="knockoff draws per clustering (default: %(default)s)")
    p.add_argument("--n-clusterings", type=_positive_int, default=clusterings, help="number of clusterings (default: %(default)s)")
    p.add_argument("--gamma", type=_open_unit, default=0.5, help="quantile-aggregation level (default: %(default)s)")
    p.add_argument("--subsample-fraction", type=float, default=0.7, help="row fraction used for each clustering (default: %(default)s)")
    p.add_argument("--lasso-penalty", type=float, default=None,
                   help="fixed per-sample lasso penalty instead of cross-validation (default: CV)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default: %(default)s)")
    p.add_argument("--timing", action="store_true", help="also record wall time (outputs then differ run to run)")


BENCH_EPILOG = """\
records.csv columns: method, snr, seed, fdp, delta_fdp, precision, recall,
delta, n_selected, auc[, runtime], error. delta is the run's largest
cluster diameter; delta_fdp is scored at that delta; auc is the step-wise
area under the precision-recall curve of q_tilde.
summary.csv columns: method, snr, n, then <stat>_mean and <stat>_se for
each of fdp, delta_fdp, precision, recall, delta, n_selected, auc.
"""


def build_parser():
    parser = _Parser(prog="ecko", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="write a synthetic dataset",
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sim.add_argument("--shape", type=_shape, default=(50, 50, 50), help="grid shape x,y,z")
    sim.add_argument("--n-samples", type=_positive_int, default=100, help="number of samples n")
    sim.add_argument("--n-rois", type=int, default=5, help="number of cubic regions of interest")
    sim.add_argument("--roi-size", type=_positive_int, default=6, help="ROI edge length in voxels")
    sim.add_argument("--snr", type=float, default=3.6, help="target signal-to-noise ratio")
    sim.add_argument("--smoothing", type=float, default=1.0, help="Gaussian smoothing width of the design, voxels")
    sim.add_argument("--seed", type=int, default=0, help="simulation seed")
    sim.add_argument("--out", required=True, help="output directory")

    inf = sub.add_parser("infer", help="run ECKO or CKO on a dataset",
                         formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    inf.add_argument("--data", required=True, help="dataset manifest (or its directory)")
    inf.add_argument("--method", choices=sorted(METHODS), default="ecko", help="inference method")
    _add_inference_flags(inf, 500, 25, 25)
    inf.add_argument("--threads", type=_positive_int, default=None,
                     help=f"worker threads (default: ${THREADS_ENV} or all cores)")
    inf.add_argument("--out", required=True, help="output directory")

    bench = sub.add_parser("benchmark", help="SNR sweep on simulated data",
                           epilog=BENCH_EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
    bench.add_argument("--snr-grid", type=_float_list, default=list(DEFAULT_SNR_GRID),
                       help="comma-separated SNR values (default: 0.5,1,...,32)")
    bench.add_argument("--n-seeds", type=_positive_int, default=30, help="datasets per SNR (default: %(default)s)")
    bench.add_argument("--methods", type=_methods, default=["ecko", "cko"], help="comma-separated methods (default: ecko,cko)")
    bench.add_argument("--shape", type=_shape, default=(16, 16, 16), help="grid shape (default: 16,16,16)")
    bench.add_argument("--n-samples", type=_positive_int, default=100, help="samples per dataset (default: %(default)s)")
    bench.add_argument("--n-rois", type=int, default=2, help="ROIs per dataset (default: %(default)s)")
    bench.add_argument("--roi-size", type=_positive_int, default=4, help="ROI edge (default: %(default)s)")
    bench.add_argument("--smoothing", type=float, default=1.0, help="design smoothing width (default: %(default)s)")
    _add_inference_flags(bench, 100, 10, 10)
    bench.add_argument("--jobs", type=_positive_int, default=None,
                       help=f"worker processes (default: ${THREADS_ENV} or all cores)")
    bench.add_argument("--out", required=True, help="output directory")
    return parser


def _params(args, seed=None):
    return EckoParams(
        n_clusters=args.n_clusters, n_draws=args.n_draws, n_clusterings=args.n_clusterings,
        alpha=args.fdr, gamma=args.gamma, subsample_fraction=args.subsample_fraction,
        master_seed=args.seed if seed is None else seed, lasso_penalty=args.lasso_penalty,
    )


# ---------------------------------------------------------------- commands

def cmd_simulate(args):
    try:
        spec = SimulationSpec(shape=args.shape, n_samples=args.n_samples, n_rois=args.n_rois,
                              roi_size=args.roi_size, target_snr=args.snr,
                              smoothing_width=args.smoothing, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    dataset, truth = generate_synthetic(spec)
    extra = {"simulation": {k: (list(v) if isinstance(v, tuple) else v)
                            for k, v in dataclasses.asdict(spec).items()}}
    path = write_dataset(args.out, dataset, truth, extra)
    log.info("wrote %s (n=%d, p=%d, support=%d)", path, dataset.n, dataset.p, len(truth.support))
    return EXIT_OK


def cmd_infer(args):
    dataset, _ = read_dataset(args.data)
    try:
        params = _params(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if params.n_clusters > dataset.p:
        raise DataError(f"--n-clusters {params.n_clusters} exceeds the {dataset.p} voxels of the dataset")
    threads = args.threads or _default_threads()
    t0 = time.perf_counter()
    result, trace = METHODS[args.method](dataset, params, threads=threads)
    wall = time.perf_counter() - t0

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_selection_table(out / "selection.csv", result, dataset.geometry)
    summary = {
        "method": args.method,
        "params": dataclasses.asdict(trace.params),
        "n": dataset.n,
        "p": dataset.p,
        "delta": trace.delta,
        "n_selected": int(len(result.selected)),
        "n_positive": int(np.sum(result.signs > 0)),
        "n_negative": int(np.sum(result.signs < 0)),
        "lasso_converged_fraction": float(np.mean([r.converged.mean() for r in trace.runs])),
    }
    if args.timing:
        summary["wall_time_s"] = wall
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    log.info("selected %d voxels at fdr=%g, delta=%.3f (%.1fs, %s kernels)",
             len(result.selected), params.alpha, trace.delta, wall, _backend.NAME)
    return EXIT_OK


def cmd_benchmark(args):
    try:
        spec = SimulationSpec(shape=args.shape, n_samples=args.n_samples, n_rois=args.n_rois,
                              roi_size=args.roi_size, smoothing_width=args.smoothing, seed=args.seed)
        params = _params(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    jobs = args.jobs or _default_threads()
    report = snr_sweep(args.methods, args.snr_grid, args.n_seeds, spec, params, n_jobs=jobs)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    columns = [c for c in RECORD_COLUMNS if args.timing or c != "runtime"]
    with open(out / "records.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for rec in report.records:
            w.writerow({k: (repr(v) if isinstance(v, float) else v)
                        for k, v in record_row(rec, args.timing).items()})
    agg = report.aggregate()
    with open(out / "summary.csv", "w", newline="") as fh:
        if agg:
            w = csv.DictWriter(fh, fieldnames=list(agg[0]), lineterminator="\n")
            w.writeheader()
            for row in agg:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    failed = sum(1 for r in report.records if r.error)
    log.info("%d records (%d failed) written to %s", len(report.records), failed, out)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "infer": cmd_infer, "benchmark": cmd_benchmark}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"ecko {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"ecko {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ClusteringFailure as exc:
        code = EXIT_DATA if isinstance(exc.__cause__, ValueError) else EXIT_NUMERIC
        print(f"ecko {args.command}: {exc}", file=sys.stderr)
        return code
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"ecko {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
