"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and semantics; used when the extension is not built or
when ``ECKO_PURE_PYTHON`` is set. Results agree with the compiled path up
to floating-point summation order.
"""
import heapq

import numpy as np


def _kkt(r, w, lam):
    viol = np.where(w > 0, np.abs(r - lam), np.where(w < 0, np.abs(r + lam), np.abs(r) - lam))
    return float(viol.max()) if viol.size else 0.0


def _objective(yy, c, r, w, lam):
    return 0.5 * yy - 0.5 * float(w @ (c + r)) + lam * float(np.abs(w).sum())


def _update(G, diag, r, w, j, lam, rows):
    gjj = diag[j]
    if gjj <= 0.0:
        return
    wj_old = w[j]
    z = r[j] + gjj * wj_old
    if z > lam:
        wj = (z - lam) / gjj
    elif z < -lam:
        wj = (z + lam) / gjj
    else:
        wj = 0.0
    if wj != wj_old:
        w[j] = wj
        if rows is None:
            r -= G[j] * (wj - wj_old)
        else:
            r[rows] -= G[j, rows] * (wj - wj_old)


def cd_lasso_gram(G, c, yy, lam, w, tol, max_iters, trace):
    m = c.shape[0]
    diag = np.diag(G).copy()
    r = c - G @ w
    trace[0] = _objective(yy, c, r, w, lam)
    viol = _kkt(r, w, lam)
    it = 0
    converged = False
    while True:
        if viol <= tol:
            converged = True
            break
        if it >= max_iters:
            break
        for j in range(m):
            _update(G, diag, r, w, j, lam, None)
        it += 1
        trace[it] = _objective(yy, c, r, w, lam)

        act = np.flatnonzero(w)
        while it < max_iters:
            if _kkt(r[act], w[act], lam) <= tol:
                break
            for j in act:
                _update(G, diag, r, w, j, lam, act)
            it += 1
            trace[it] = _objective(yy, c, r * (w != 0), w, lam)
        r = c - G @ w
        viol = _kkt(r, w, lam)
    return it, converged, viol


def ward_agglomerate(features, edges, n_clusters):
    p, d = features.shape
    total = max(2 * p - 1, 1)
    sums = np.zeros((total, d))
    sums[:p] = features
    size = np.zeros(total)
    size[:p] = 1.0
    parent = np.arange(total)
    alive = np.zeros(total, dtype=bool)
    alive[:p] = True
    nbrs = [set() for _ in range(total)]

    def cost(a, b):
        diff = sums[a] / size[a] - sums[b] / size[b]
        return size[a] * size[b] / (size[a] + size[b]) * float(diff @ diff)

    heap = []
    if len(edges):
        ei, ej = edges[:, 0], edges[:, 1]
        diff = features[ei] - features[ej]
        costs = 0.5 * np.einsum("ij,ij->i", diff, diff)
        for i, j, cst in zip(ei.tolist(), ej.tolist(), costs.tolist()):
            nbrs[i].add(j)
            nbrs[j].add(i)
            heap.append((cst, i, j))
        heapq.heapify(heap)

    n_alive = p
    n_merges = 0
    t = p
    while n_alive > n_clusters and heap:
        _, a, b = heapq.heappop(heap)
        if not (alive[a] and alive[b]):
            continue
        sums[t] = sums[a] + sums[b]
        size[t] = size[a] + size[b]
        alive[a] = alive[b] = False
        alive[t] = True
        parent[a] = parent[b] = t
        n_alive -= 1
        n_merges += 1
        merged = sorted(nb for nb in (nbrs[a] | nbrs[b]) if alive[nb])
        nbrs[a] = nbrs[b] = None
        nbrs[t] = set(merged)
        for nb in merged:
            nbrs[nb].add(t)
            heapq.heappush(heap, (cost(nb, t), nb, t))
        t += 1

    roots = np.empty(p, dtype=np.intp)
    for i in range(p):
        r = i
        while parent[r] != r:
            r = parent[r]
        roots[i] = r
    return roots, n_merges
