"""Global exploration (Stage 1), task mapping (Stage 2) and the stopping rule."""

from .extract import build_map, make_extractor
from .stage1 import Stage1Error, Stage1Result, derive_focus_points, distill_global, run_stage1
from .stage2 import Stage2Result, run_stage2
from .stopping import (
    ConvergenceTrace,
    StopDecision,
    StoppingParams,
    TraceRow,
    batch_decisions,
    decision_stream,
    novelty,
    stop_decision,
    trace_from_tsv,
    trace_to_tsv,
)

__all__ = [
    "ConvergenceTrace",
    "StopDecision",
    "StoppingParams",
    "TraceRow",
    "batch_decisions",
    "decision_stream",
    "novelty",
    "stop_decision",
    "trace_from_tsv",
    "trace_to_tsv",
    "build_map",
    "make_extractor",
    "Stage1Error",
    "Stage1Result",
    "derive_focus_points",
    "distill_global",
    "run_stage1",
    "Stage2Result",
    "run_stage2",
]
