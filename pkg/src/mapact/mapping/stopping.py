"""Dual-convergence stopping rule for adaptive exploration."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .. import _kernels


class StopDecision(str, Enum):
    CONTINUE = "continue"
    STOP_CONVERGED = "stop_converged"
    STOP_BUDGET = "stop_budget"


_CODES = (StopDecision.CONTINUE, StopDecision.STOP_CONVERGED, StopDecision.STOP_BUDGET)


@dataclass(frozen=True)
class StoppingParams:
    W_k: int = 3
    W_n: int = 5
    epsilon: float = 0.5
    T_min: int = 3
    T_max: int = 15
    slack: int = 0

    def __post_init__(self):
        if not (1 <= self.T_min <= self.T_max):
            raise ValueError("need 1 <= T_min <= T_max")
        if self.W_k < 1 or self.W_n < 1:
            raise ValueError("windows must be >= 1")
        if not (0 < self.epsilon <= 1):
            raise ValueError("epsilon must lie in (0, 1]")
        if self.slack < 0:
            raise ValueError("slack must be >= 0")

    def with_budget(self, budget: int) -> "StoppingParams":
        t_max = min(self.T_max, budget)
        return StoppingParams(self.W_k, self.W_n, self.epsilon, min(self.T_min, t_max), t_max, self.slack)


@dataclass(frozen=True)
class TraceRow:
    t: int
    delta_M: int
    visit_count: int
    novelty: float
    cond_a_met: bool
    cond_b_met: bool
    decision: str = StopDecision.CONTINUE.value


@dataclass(frozen=True)
class ConvergenceTrace:
    rows: tuple[TraceRow, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        for a, b in zip(self.rows, self.rows[1:]):
            if b.t <= a.t:
                raise ValueError("trace steps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]

    def appended(self, delta_M: int, visit_count: int, params: "StoppingParams") -> "ConvergenceTrace":
        """Trace with one more step, its condition flags and decision filled in."""
        t = self.rows[-1].t + 1 if self.rows else 1
        nov = novelty(visit_count)
        dm = self.column("delta_M") + [delta_M]
        nv = self.column("novelty") + [nov]
        ts = self.column("t") + [t]
        dec, ca, cb = scan(dm, nv, ts, params)
        row = TraceRow(t, int(delta_M), int(visit_count), nov, bool(ca[-1]), bool(cb[-1]), _CODES[int(dec[-1])].value)
        return ConvergenceTrace(self.rows + (row,))

    @property
    def stop_step(self):
        for r in self.rows:
            if r.decision != StopDecision.CONTINUE.value:
                return r.t
        return None


def novelty(visit_count: int) -> float:
    """State-novelty reward 1/sqrt(N) for an observation seen N times."""
    if isinstance(visit_count, bool) or int(visit_count) != visit_count:
        raise TypeError("visit_count must be an integer")
    if visit_count < 1:
        raise ValueError("visit_count must be >= 1: an observed state has been seen at least once")
    n = int(visit_count)
    y = 1.0 / math.sqrt(n)
    # two roundings can leave y just over one ulp off; step to the nearest double,
    # deciding each neighbour midpoint exactly (mid < 1/sqrt(n) iff mid^2 * n < 1)
    while True:
        hi = math.nextafter(y, math.inf)
        if _mid_sq_cmp(y, hi, n) < 0:
            y = hi
            continue
        lo = math.nextafter(y, 0.0)
        if _mid_sq_cmp(lo, y, n) > 0:
            y = lo
            continue
        return y


def _mid_sq_cmp(a: float, b: float, n: int) -> int:
    """Sign of ((a + b) / 2)^2 * n - 1, in exact integer arithmetic."""
    pa, qa = a.as_integer_ratio()
    pb, qb = b.as_integer_ratio()
    lhs = (pa * qb + pb * qa) ** 2 * n
    rhs = 4 * (qa * qb) ** 2
    return (lhs > rhs) - (lhs < rhs)


def scan(delta_M, novelties, ts, params: StoppingParams):
    return _kernels.scan_stop(
        np.asarray(delta_M, np.int64),
        np.asarray(novelties, np.float64),
        np.asarray(ts, np.int64),
        params.W_k,
        params.W_n,
        params.epsilon,
        params.T_min,
        params.T_max,
        params.slack,
    )


def decision_stream(delta_M, novelties, params: StoppingParams) -> list[StopDecision]:
    """Decision after every prefix, with step t = position + 1."""
    n = len(delta_M)
    if len(novelties) != n:
        raise ValueError("delta_M and novelty lengths differ")
    dec, _, _ = scan(delta_M, novelties, np.arange(1, n + 1), params)
    return [_CODES[int(d)] for d in dec]


def stop_decision(trace: ConvergenceTrace, params: StoppingParams) -> StopDecision:
    if not trace.rows:
        raise ValueError("empty trace")
    dec, _, _ = scan(trace.column("delta_M"), trace.column("novelty"), trace.column("t"), params)
    return _CODES[int(dec[-1])]


def batch_decisions(delta_M, novelties, params: StoppingParams) -> np.ndarray:
    """Decision codes (0 continue, 1 converged, 2 budget) for a 2-D batch of traces."""
    return _kernels.scan_stop_batch(
        np.asarray(delta_M, np.int64),
        np.asarray(novelties, np.float64),
        params.W_k,
        params.W_n,
        params.epsilon,
        params.T_min,
        params.T_max,
        params.slack,
    )


TRACE_COLUMNS = ("t", "delta_M", "visit_count", "novelty", "cond_a", "cond_b", "decision")


def trace_to_tsv(trace: ConvergenceTrace) -> str:
    lines = ["\t".join(TRACE_COLUMNS)]
    for r in trace.rows:
        lines.append(
            f"{r.t}\t{r.delta_M}\t{r.visit_count}\t{r.novelty!r}\t{int(r.cond_a_met)}\t{int(r.cond_b_met)}\t{r.decision}"
        )
    return "\n".join(lines) + "\n"


def trace_from_tsv(text: str) -> ConvergenceTrace:
    lines = text.strip("\n").split("\n")
    if tuple(lines[0].split("\t")) != TRACE_COLUMNS:
        raise ValueError("unexpected trace header")
    rows = []
    for line in lines[1:]:
        t, dm, vc, nv, a, b, d = line.split("\t")
        rows.append(TraceRow(int(t), int(dm), int(vc), float(nv), a == "1", b == "1", d))
    return ConvergenceTrace(tuple(rows))
