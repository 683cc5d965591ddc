"""Pure-Python kernels. Same algorithms and tie-breaks as ``_ckernels.pyx``."""

from __future__ import annotations

import math
from collections import deque

import numpy as np

CONTINUE, STOP_CONVERGED, STOP_BUDGET = 0, 1, 2

# up, down, left, right
DR = (-1, 1, 0, 0)
DC = (0, 0, -1, 1)
NO_DIR = 4


def _window_below(window, eps: float) -> bool:
    # exact test of sum(window)/n < eps
    return math.fsum(list(window) + [-eps] * len(window)) < 0.0


def scan_stop(delta_m, novelty, t, W_k, W_n, eps, T_min, T_max, slack=0):
    """Decision, Cond_A flag and Cond_B flag for every prefix of one trace."""
    delta_m = np.asarray(delta_m, dtype=np.int64)
    novelty = np.asarray(novelty, dtype=np.float64)
    t = np.asarray(t, dtype=np.int64)
    n = len(delta_m)
    dec = np.zeros(n, dtype=np.int8)
    ca = np.zeros(n, dtype=np.uint8)
    cb = np.zeros(n, dtype=np.uint8)
    run = 0
    nov = novelty.tolist()
    for i in range(n):
        run = run + 1 if delta_m[i] <= slack else 0
        a = run >= W_k
        b = i + 1 >= W_n and _window_below(nov[i + 1 - W_n : i + 1], eps)
        ca[i] = a
        cb[i] = b
        if t[i] >= T_max:
            dec[i] = STOP_BUDGET
        elif t[i] >= T_min and a and b:
            dec[i] = STOP_CONVERGED
    return dec, ca, cb


def scan_stop_batch(delta_m, novelty, W_k, W_n, eps, T_min, T_max, slack=0):
    """Decisions for a batch of traces (rows); step t of column j is j + 1."""
    delta_m = np.asarray(delta_m, dtype=np.int64)
    novelty = np.asarray(novelty, dtype=np.float64)
    rows, cols = delta_m.shape
    t = np.arange(1, cols + 1, dtype=np.int64)
    out = np.zeros((rows, cols), dtype=np.int8)
    for r in range(rows):
        out[r] = scan_stop(delta_m[r], novelty[r], t, W_k, W_n, eps, T_min, T_max, slack)[0]
    return out


def hazard_index(phase: int, length: int) -> int:
    if length <= 1:
        return 0
    period = 2 * (length - 1)
    k = phase % period
    return k if k < length else period - k


def plan_grid(walk, sr, sc, gr, gc, hz_cells, hz_len, period, turn_cost=2, max_cost=64, phase0=0, lastdir0=NO_DIR):
    """Cheapest move sequence from (sr, sc) to (gr, gc) under the grid cost model.

    State is (row, col, last direction, hazard phase). Bucketed Dijkstra with
    FIFO buckets and neighbour order up, down, left, right. Returns
    ``(cost, directions)`` or ``(-1, [])`` when nothing fits in ``max_cost``.
    """
    walk = np.asarray(walk, dtype=np.uint8)
    H, W = walk.shape
    hz_cells = np.asarray(hz_cells, dtype=np.int32)
    hz_len = [int(x) for x in hz_len]
    P = max(1, int(period))
    nh = len(hz_len)
    # occupied[p] = set of hazard cells at phase p
    occ = []
    for p in range(P):
        s = set()
        for h in range(nh):
            idx = hazard_index(p, hz_len[h])
            s.add((int(hz_cells[h, idx, 0]), int(hz_cells[h, idx, 1])))
        occ.append(s)

    def sid(r, c, d, p):
        return ((r * W + c) * 5 + d) * P + p

    n_states = H * W * 5 * P
    dist = np.full(n_states, -1, dtype=np.int64)
    parent = np.full(n_states, -1, dtype=np.int64)
    pdir = np.full(n_states, -1, dtype=np.int8)
    done = np.zeros(n_states, dtype=np.uint8)
    start = sid(sr, sc, lastdir0, phase0 % P)
    dist[start] = 0
    buckets = [deque() for _ in range(max_cost + 1)]
    buckets[0].append(start)
    for cost in range(max_cost + 1):
        q = buckets[cost]
        while q:
            s = q.popleft()
            if done[s] or dist[s] != cost:
                continue
            done[s] = 1
            p = s % P
            rest = s // P
            d = rest % 5
            cell = rest // 5
            r, c = divmod(cell, W)
            if r == gr and c == gc:
                dirs = []
                while s != start:
                    dirs.append(int(pdir[s]))
                    s = int(parent[s])
                dirs.reverse()
                return cost, dirs
            np_ = (p + 1) % P
            for k in range(4):
                nr, nc = r + DR[k], c + DC[k]
                if nr < 0 or nr >= H or nc < 0 or nc >= W or not walk[nr, nc]:
                    continue
                if (nr, nc) in occ[np_]:
                    continue
                step = 1 if (d == NO_DIR or d == k) else turn_cost
                nd = cost + step
                if nd > max_cost:
                    continue
                t2 = sid(nr, nc, k, np_)
                if dist[t2] == -1 or nd < dist[t2]:
                    dist[t2] = nd
                    parent[t2] = s
                    pdir[t2] = k
                    buckets[nd].append(t2)
    return -1, []
