"""Metrics, Map-QA, perturbation harness and dataset export."""

from .export import (
    STATS_COLUMNS,
    Alignment,
    ExportError,
    ExportResult,
    Thresholds,
    alignment_of,
    export_dataset,
    format_stats,
    make_record,
    mapping_snapshot,
    read_dataset,
    revalidate,
    dataset_stats,
)
from .metrics import MetricSummary, compute_metrics, delta_steps_of, format_summary
from .perturb import PerturbationConfig, plan_perturbation
from .qa import CATEGORIES, QAItem, QAResult, answer_qa_from_map, generate_qa

__all__ = [
    "STATS_COLUMNS",
    "Alignment",
    "ExportError",
    "ExportResult",
    "Thresholds",
    "alignment_of",
    "export_dataset",
    "format_stats",
    "make_record",
    "mapping_snapshot",
    "read_dataset",
    "revalidate",
    "dataset_stats",
    "MetricSummary",
    "compute_metrics",
    "delta_steps_of",
    "format_summary",
    "PerturbationConfig",
    "plan_perturbation",
    "CATEGORIES",
    "QAItem",
    "QAResult",
    "answer_qa_from_map",
    "generate_qa",
]
