# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: Gram-form lasso coordinate descent and
graph-constrained Ward agglomeration.

Both functions mirror ``ecko._fallback`` operation for operation; the
Python side validates inputs and owns every allocation that escapes.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs
from libcpp.pair cimport pair
from libcpp.queue cimport priority_queue
from libcpp.vector cimport vector

cnp.import_array()


cdef inline double _soft(double x, double t) noexcept nogil:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


cdef inline void _residual(const double[:, ::1] G, const double[::1] c,
                           const double[::1] w, double[::1] r) noexcept nogil:
    cdef Py_ssize_t m = c.shape[0], j, k
    cdef double acc
    for j in range(m):
        acc = 0.0
        for k in range(m):
            if w[k] != 0.0:
                acc += G[j, k] * w[k]
        r[j] = c[j] - acc


cdef inline double _kkt(const double[::1] r, const double[::1] w,
                        double lam) noexcept nogil:
    cdef Py_ssize_t j
    cdef double v, worst = 0.0
    for j in range(w.shape[0]):
        if w[j] > 0.0:
            v = fabs(r[j] - lam)
        elif w[j] < 0.0:
            v = fabs(r[j] + lam)
        else:
            v = fabs(r[j]) - lam
        if v > worst:
            worst = v
    return worst


cdef inline double _objective(double half_yy, const double[::1] c,
                              const double[::1] r, const double[::1] w,
                              double lam) noexcept nogil:
    # 0.5*yy - c.w + 0.5*w.G.w with G.w = c - r
    cdef Py_ssize_t j
    cdef double lin = 0.0, l1 = 0.0
    for j in range(w.shape[0]):
        if w[j] != 0.0:
            lin += w[j] * (c[j] + r[j])
            l1 += fabs(w[j])
    return half_yy - 0.5 * lin + lam * l1


def cd_lasso_gram(const double[:, ::1] G, const double[::1] c, double yy,
                  double lam, double[::1] w, double tol, int max_iters,
                  double[::1] trace):
    """Cyclic coordinate descent on ``0.5*yy - c.w + 0.5 w'Gw + lam*|w|_1``.

    Alternates one sweep over all coordinates with sweeps restricted to the
    nonzero set until that set satisfies the KKT conditions; convergence is
    always judged on a freshly computed ``c - G w``. ``w`` is updated in
    place (warm start). ``trace`` must hold ``max_iters + 1`` objective
    values. Returns ``(n_iters, converged, kkt_violation)``.
    """
    cdef Py_ssize_t m = c.shape[0], j, k, a, na
    cdef int it = 0
    cdef bint converged = False
    cdef double viol, v, z, wj, d, gjj
    cdef double[::1] r = np.empty(m, dtype=np.float64)
    cdef Py_ssize_t[::1] act = np.empty(m, dtype=np.intp)

    with nogil:
        _residual(G, c, w, r)
        trace[0] = _objective(0.5 * yy, c, r, w, lam)
        viol = _kkt(r, w, lam)
        while True:
            if viol <= tol:
                converged = True
                break
            if it >= max_iters:
                break
            for j in range(m):
                gjj = G[j, j]
                if gjj <= 0.0:
                    continue
                z = r[j] + gjj * w[j]
                wj = _soft(z, lam) / gjj
                if wj != w[j]:
                    d = wj - w[j]
                    w[j] = wj
                    for k in range(m):
                        r[k] -= G[j, k] * d
            it += 1
            trace[it] = _objective(0.5 * yy, c, r, w, lam)

            na = 0
            for j in range(m):
                if w[j] != 0.0:
                    act[na] = j
                    na += 1
            while it < max_iters:
                v = 0.0
                for a in range(na):
                    j = act[a]
                    if w[j] > 0.0:
                        z = fabs(r[j] - lam)
                    elif w[j] < 0.0:
                        z = fabs(r[j] + lam)
                    else:
                        z = fabs(r[j]) - lam
                    if z > v:
                        v = z
                if v <= tol:
                    break
                for a in range(na):
                    j = act[a]
                    gjj = G[j, j]
                    z = r[j] + gjj * w[j]
                    wj = _soft(z, lam) / gjj
                    if wj != w[j]:
                        d = wj - w[j]
                        w[j] = wj
                        for k in range(na):
                            r[act[k]] -= G[j, act[k]] * d
                it += 1
                trace[it] = _objective(0.5 * yy, c, r, w, lam)
            _residual(G, c, w, r)
            viol = _kkt(r, w, lam)
    return it, bool(converged), viol


ctypedef pair[double, pair[Py_ssize_t, Py_ssize_t]] _entry


cdef inline double _ward_cost(const double[:, ::1] sums, const double[::1] size,
                              Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef Py_ssize_t k
    cdef double na = size[a], nb = size[b], diff, acc = 0.0
    for k in range(sums.shape[1]):
        diff = sums[a, k] / na - sums[b, k] / nb
        acc += diff * diff
    return na * nb / (na + nb) * acc


def ward_agglomerate(const double[:, ::1] features, const cnp.intp_t[:, ::1] edges,
                     Py_ssize_t n_clusters):
    """Merge adjacent clusters by smallest Ward increase until
    ``n_clusters`` remain.

    ``features`` is (p, d), one row per node; ``edges`` is (E, 2) with
    ``i < j``. Returns the root id of every node (ids >= p denote merged
    clusters, in merge order) and the number of merges performed.
    """
    cdef Py_ssize_t p = features.shape[0], d = features.shape[1]
    cdef Py_ssize_t total = 2 * p - 1 if p > 0 else 0
    cdef Py_ssize_t e, i, j, a, b, t, nb, k, n_alive = p, n_merges = 0
    cdef double cost
    cdef _entry top
    cdef priority_queue[_entry] heap
    cdef vector[vector[Py_ssize_t]] nbrs
    cdef vector[Py_ssize_t] merged

    sums_arr = np.zeros((max(total, 1), d), dtype=np.float64)
    sums_arr[:p] = features
    cdef double[:, ::1] sums = sums_arr
    cdef double[::1] size = np.zeros(max(total, 1), dtype=np.float64)
    cdef cnp.intp_t[::1] parent = np.arange(max(total, 1), dtype=np.intp)
    cdef unsigned char[::1] alive = np.zeros(max(total, 1), dtype=np.uint8)
    cdef cnp.intp_t[::1] stamp = np.full(max(total, 1), -1, dtype=np.intp)

    with nogil:
        nbrs.resize(total)
        for i in range(p):
            size[i] = 1.0
            alive[i] = 1
        for e in range(edges.shape[0]):
            i = edges[e, 0]
            j = edges[e, 1]
            nbrs[i].push_back(j)
            nbrs[j].push_back(i)
            cost = _ward_cost(sums, size, i, j)
            heap.push(_entry(-cost, pair[Py_ssize_t, Py_ssize_t](-i, -j)))

        t = p
        while n_alive > n_clusters and not heap.empty():
            top = heap.top()
            heap.pop()
            a = -top.second.first
            b = -top.second.second
            if not alive[a] or not alive[b]:
                continue
            for k in range(d):
                sums[t, k] = sums[a, k] + sums[b, k]
            size[t] = size[a] + size[b]
            alive[a] = 0
            alive[b] = 0
            alive[t] = 1
            parent[a] = t
            parent[b] = t
            n_alive -= 1
            n_merges += 1

            merged.clear()
            stamp[t] = t
            for i in range(<Py_ssize_t>nbrs[a].size()):
                nb = nbrs[a][i]
                if alive[nb] and stamp[nb] != t:
                    stamp[nb] = t
                    merged.push_back(nb)
            for i in range(<Py_ssize_t>nbrs[b].size()):
                nb = nbrs[b][i]
                if alive[nb] and stamp[nb] != t:
                    stamp[nb] = t
                    merged.push_back(nb)
            vector[Py_ssize_t]().swap(nbrs[a])
            vector[Py_ssize_t]().swap(nbrs[b])
            for i in range(<Py_ssize_t>merged.size()):
                nb = merged[i]
                nbrs[t].push_back(nb)
                nbrs[nb].push_back(t)
                cost = _ward_cost(sums, size, nb, t)
                # nb < t always: merged ids are allocated increasingly
                heap.push(_entry(-cost, pair[Py_ssize_t, Py_ssize_t](-nb, -t)))
            t += 1

    roots = np.empty(p, dtype=np.intp)
    cdef cnp.intp_t[::1] roots_v = roots
    cdef Py_ssize_t r
    for i in range(p):
        r = i
        while parent[r] != r:
            r = parent[r]
        roots_v[i] = r
    return roots, n_merges
