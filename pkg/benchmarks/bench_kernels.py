"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import timeit

import numpy as np

from ecko import _fallback
from ecko.cluster import adjacency_edges
from ecko.core import GridGeometry

try:
    from ecko import _kernels
except ImportError:  # extension not built
    _kernels = None


def lasso_case(n, m, seed=0):
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((n, m))
    D = (D - D.mean(axis=0)) / D.std(axis=0)
    y = D[:, :5].sum(axis=1) + rng.standard_normal(n)
    y -= y.mean()
    c = D.T @ y
    G = np.ascontiguousarray(D.T @ D)
    lam = 0.05 * np.abs(c).max()

    def call(impl):
        w = np.zeros(m)
        impl.cd_lasso_gram(G, c, float(y @ y), lam, w, 1e-6, 1000, np.empty(1001))
    return call


def ward_case(shape, q, n_samples=70, seed=0):
    rng = np.random.default_rng(seed)
    g = GridGeometry.full(shape)
    feats = np.ascontiguousarray(rng.standard_normal((g.n_features, n_samples)))
    edges = adjacency_edges(g)

    def call(impl):
        impl.ward_agglomerate(feats, edges, q)
    return call


CASES = [
    ("lasso n=100 m=200", lasso_case(100, 200)),
    ("lasso n=100 m=1000", lasso_case(100, 1000)),
    ("ward 16^3 -> 100", ward_case((16, 16, 16), 100)),
    ("ward 24^3 -> 500", ward_case((24, 24, 24), 500)),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    impls = [("python", _fallback)] + ([("cython", _kernels)] if _kernels else [])
    print(f"{'case':<22}" + "".join(f"{name:>12}" for name, _ in impls) + ("   speedup" if _kernels else ""))
    for label, call in CASES:
        times = [min(timeit.repeat(lambda: call(impl), number=1, repeat=args.repeat)) for _, impl in impls]
        line = f"{label:<22}" + "".join(f"{t:>11.4f}s" for t in times)
        if _kernels:
            line += f"{times[0] / times[1]:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
