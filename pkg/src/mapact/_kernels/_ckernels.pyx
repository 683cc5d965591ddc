# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: stopping-rule scan and grid planner."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from libcpp.vector cimport vector
from libcpp.deque cimport deque

cnp.import_array()

cdef int NO_DIR = 4
cdef int DR[4]
cdef int DC[4]
DR[:] = [-1, 1, 0, 0]
DC[:] = [0, 0, -1, 1]


cdef bint window_below(const double[:] nov, Py_ssize_t lo, Py_ssize_t n, double eps):
    # Shewchuk partials: exact sign of sum(nov[lo:lo+n]) - n*eps
    cdef vector[double] partials
    cdef double x, y, hi, lo_
    cdef Py_ssize_t i, j, k
    for k in range(2 * n):
        x = nov[lo + k] if k < n else -eps
        i = 0
        for j in range(<Py_ssize_t>partials.size()):
            y = partials[j]
            if fabs(x) < fabs(y):
                x, y = y, x
            hi = x + y
            lo_ = y - (hi - x)
            if lo_ != 0.0:
                partials[i] = lo_
                i += 1
            x = hi
        partials.resize(i)
        partials.push_back(x)
    # partials are non-overlapping and increasing in magnitude
    for j in range(<Py_ssize_t>partials.size() - 1, -1, -1):
        if partials[j] != 0.0:
            return partials[j] < 0.0
    return False


cdef void scan_row(const long long[:] dm, const double[:] nov, const long long[:] t,
                   signed char[:] dec, unsigned char[:] ca, unsigned char[:] cb,
                   long long W_k, long long W_n, double eps, long long T_min, long long T_max,
                   long long slack):
    cdef Py_ssize_t n = dm.shape[0], i
    cdef long long run = 0
    cdef bint a, b
    for i in range(n):
        if dm[i] <= slack:
            run += 1
        else:
            run = 0
        a = run >= W_k
        b = (i + 1 >= W_n) and window_below(nov, i + 1 - W_n, W_n, eps)
        ca[i] = a
        cb[i] = b
        if t[i] >= T_max:
            dec[i] = 2
        elif t[i] >= T_min and a and b:
            dec[i] = 1
        else:
            dec[i] = 0


def scan_stop(delta_m, novelty, t, long long W_k, long long W_n, double eps, long long T_min,
              long long T_max, long long slack=0):
    cdef long long[:] dm = np.ascontiguousarray(delta_m, dtype=np.int64)
    cdef double[:] nov = np.ascontiguousarray(novelty, dtype=np.float64)
    cdef long long[:] tt = np.ascontiguousarray(t, dtype=np.int64)
    n = dm.shape[0]
    dec = np.zeros(n, dtype=np.int8)
    ca = np.zeros(n, dtype=np.uint8)
    cb = np.zeros(n, dtype=np.uint8)
    scan_row(dm, nov, tt, dec, ca, cb, W_k, W_n, eps, T_min, T_max, slack)
    return dec, ca, cb


def scan_stop_batch(delta_m, novelty, long long W_k, long long W_n, double eps, long long T_min,
                    long long T_max, long long slack=0):
    cdef long long[:, :] dm = np.ascontiguousarray(delta_m, dtype=np.int64)
    cdef double[:, :] nov = np.ascontiguousarray(novelty, dtype=np.float64)
    cdef Py_ssize_t rows = dm.shape[0], cols = dm.shape[1], r
    cdef long long[:] t = np.arange(1, cols + 1, dtype=np.int64)
    out = np.zeros((rows, cols), dtype=np.int8)
    cdef signed char[:, :] o = out
    cdef unsigned char[:] ca = np.zeros(cols, dtype=np.uint8)
    cdef unsigned char[:] cb = np.zeros(cols, dtype=np.uint8)
    for r in range(rows):
        scan_row(dm[r], nov[r], t, o[r], ca, cb, W_k, W_n, eps, T_min, T_max, slack)
    return out


cdef inline int hz_index(long long phase, int length):
    cdef long long period, k
    if length <= 1:
        return 0
    period = 2 * (length - 1)
    k = phase % period
    return <int>(k if k < length else period - k)


def plan_grid(walk, int sr, int sc, int gr, int gc, hz_cells, hz_len, int period, int turn_cost=2,
              int max_cost=64, int phase0=0, int lastdir0=4):
    cdef unsigned char[:, :] wk = np.ascontiguousarray(walk, dtype=np.uint8)
    cdef int H = wk.shape[0], W = wk.shape[1]
    cdef int P = period if period > 0 else 1
    lens = np.ascontiguousarray(hz_len, dtype=np.int32)
    cdef int nh = lens.shape[0]
    cdef int[:] hl = lens
    cells = np.ascontiguousarray(hz_cells, dtype=np.int32)
    # blocked[p, r, c] = a hazard sits on (r, c) at phase p
    blocked_np = np.zeros((P, H, W), dtype=np.uint8)
    cdef unsigned char[:, :, :] blocked = blocked_np
    cdef int[:, :, :] hc
    cdef int p, h, idx
    if nh > 0:
        hc = cells
        for p in range(P):
            for h in range(nh):
                idx = hz_index(p, hl[h])
                blocked[p, hc[h, idx, 0], hc[h, idx, 1]] = 1
    cdef long long n_states = <long long>H * W * 5 * P
    dist_np = np.full(n_states, -1, dtype=np.int64)
    parent_np = np.full(n_states, -1, dtype=np.int64)
    pdir_np = np.full(n_states, -1, dtype=np.int8)
    done_np = np.zeros(n_states, dtype=np.uint8)
    cdef long long[:] dist = dist_np
    cdef long long[:] parent = parent_np
    cdef signed char[:] pdir = pdir_np
    cdef unsigned char[:] done = done_np
    cdef vector[deque[long long]] buckets
    buckets.resize(max_cost + 1)
    cdef long long start = ((<long long>sr * W + sc) * 5 + lastdir0) * P + (phase0 % P)
    dist[start] = 0
    buckets[0].push_back(start)
    cdef int cost, d, k, nr, nc, r, c, np_, step, nd
    cdef long long s, rest, cell, t2
    for cost in range(max_cost + 1):
        while not buckets[cost].empty():
            s = buckets[cost].front()
            buckets[cost].pop_front()
            if done[s] or dist[s] != cost:
                continue
            done[s] = 1
            p = <int>(s % P)
            rest = s // P
            d = <int>(rest % 5)
            cell = rest // 5
            r = <int>(cell // W)
            c = <int>(cell % W)
            if r == gr and c == gc:
                dirs = []
                while s != start:
                    dirs.append(<int>pdir[s])
                    s = parent[s]
                dirs.reverse()
                return cost, dirs
            np_ = (p + 1) % P
            for k in range(4):
                nr = r + DR[k]
                nc = c + DC[k]
                if nr < 0 or nr >= H or nc < 0 or nc >= W or not wk[nr, nc]:
                    continue
                if blocked[np_, nr, nc]:
                    continue
                step = 1 if (d == NO_DIR or d == k) else turn_cost
                nd = cost + step
                if nd > max_cost:
                    continue
                t2 = ((<long long>nr * W + nc) * 5 + k) * P + np_
                if dist[t2] == -1 or nd < dist[t2]:
                    dist[t2] = nd
                    parent[t2] = s
                    pdir[t2] = k
                    buckets[nd].push_back(t2)
    return -1, []
