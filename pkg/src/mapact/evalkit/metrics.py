"""Episode-level metrics: pass@1, perturbation metrics and turn/token accounting."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

from ..core import EpisodeReport


@dataclass(frozen=True)
class MetricSummary:
    pass_at_1: float
    n_episodes: int
    avg_turns_map: float
    avg_turns_act: float
    avg_tokens_map: float
    avg_tokens_act: float
    pass_at_1_perturb: Optional[float] = None
    reexplore_rate: Optional[float] = None
    delta_steps: Optional[float] = None
    n_perturbed: int = 0
    max_level: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


def delta_steps_of(report: EpisodeReport) -> int:
    """Steps spent after the perturbation: L - t_perturb - 1."""
    if report.t_perturb is None:
        raise ValueError("report is not perturbed")
    return report.rollout_length - report.t_perturb - 1


def _mean(xs) -> float:
    xs = list(xs)
    return sum(xs) / len(xs)


def compute_metrics(reports: Sequence[EpisodeReport]) -> MetricSummary:
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to summarize")
    n = len(reports)
    pert = [r for r in reports if r.perturbed]
    levels = [r.max_level for r in reports if r.max_level is not None]
    # sorting makes the float sums independent of report order
    summary = dict(
        pass_at_1=sum(r.success for r in reports) / n,
        n_episodes=n,
        avg_turns_map=_mean(sorted(r.mapping_steps for r in reports)),
        avg_turns_act=_mean(sorted(r.acting_steps for r in reports)),
        avg_tokens_map=_mean(sorted(r.tokens_map for r in reports)),
        avg_tokens_act=_mean(sorted(r.tokens_act for r in reports)),
        n_perturbed=len(pert),
        max_level=_mean(sorted(levels)) if levels else None,
    )
    if pert:
        summary.update(
            pass_at_1_perturb=sum(r.success for r in pert) / len(pert),
            reexplore_rate=sum(bool(r.reexplored) for r in pert) / len(pert),
            delta_steps=_mean(sorted(delta_steps_of(r) for r in pert)),
        )
    return MetricSummary(**summary)


def format_summary(label: str, m: MetricSummary) -> str:
    """One human-readable table row."""
    cells = [label, f"{m.pass_at_1:.3f}", f"{m.avg_turns_map:.2f}", f"{m.avg_turns_act:.2f}", f"{m.avg_tokens_map / 1000:.2f}", f"{m.avg_tokens_act / 1000:.2f}"]
    if m.n_perturbed:
        cells += [f"{m.pass_at_1_perturb:.3f}", f"{m.reexplore_rate:.3f}", f"{m.delta_steps:.2f}"]
    return " | ".join(cells)


SUMMARY_HEADER = ("run", "pass@1", "turns(map)", "turns(act)", "tokens(map,k)", "tokens(act,k)")
PERTURB_HEADER = ("pass@1_perturb", "re-explore", "dSteps")
