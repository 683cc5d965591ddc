"""Training-data export with ground-truth alignment filtering.

Each kept run becomes one JSON line holding the mapping trajectory, the map,
the execution trajectory and two alignment scores computed against the
engine state at the end of mapping. The file starts with a header line; see
docs/schema.md for every field.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Iterable, Optional

from ..core import (
    CognitiveMap,
    map_from_dict,
    map_to_dict,
    trajectory_from_dict,
    trajectory_to_dict,
)
from ..envs import FAMILIES, make

DATASET_FORMAT = "mapact/dataset"
DATASET_VERSION = 1
STATS_COLUMNS = ("Env", "# Traj.", "Avg. Steps", "Avg. Tokens(k)")


class ExportError(RuntimeError):
    pass


@dataclass(frozen=True)
class Thresholds:
    coverage_min: float = 0.8
    accuracy_min: float = 0.95

    def __post_init__(self):
        if not (0.0 <= self.coverage_min <= 1.0 and 0.0 <= self.accuracy_min <= 1.0):
            raise ValueError("thresholds must lie in [0, 1]")


@dataclass(frozen=True)
class Alignment:
    spatial_coverage: float
    factual_accuracy: float

    def passes(self, t: Thresholds) -> bool:
        return self.spatial_coverage >= t.coverage_min and self.factual_accuracy >= t.accuracy_min


def mapping_snapshot(env_id: str, seed: int, template: str, mapping):
    """Rebuild the world and replay the mapping actions; the engine state they end in."""
    env = make(env_id, seed, template)
    env.reset()
    for rec in mapping.steps:
        obs, _, _ = env.step(rec.action.text)
        if obs.text != rec.observation.text:
            raise ExportError(f"{mapping.traj_id}: replay diverges at step {rec.observation.step_index}")
    return env.ground_truth()


def alignment_of(cmap: CognitiveMap, snapshot) -> Alignment:
    """Spatial coverage and factual accuracy of a map against a snapshot.

    A reachable location counts as mapped when the map lists it and, for a
    location that holds things, also says something about its contents.
    Accuracy is the share of map entries that are ground-truth facts; an
    empty map scores 0.
    """
    truth = snapshot.fact_keys()
    reachable = {f.subject for f in snapshot.facts if f.kind == "spatial" and f.relation == "reachable"}
    holding = set(snapshot.explored)
    listed = {e.subject for e in cmap.entries if e.kind == "spatial" and e.relation == "reachable"}
    contents = {e.object for e in cmap.entries if (e.kind == "spatial" and e.relation == "at") or e.kind == "negative"}
    mapped = {l for l in reachable & listed if l not in holding or l in contents}
    coverage = len(mapped) / len(reachable) if reachable else 1.0
    accuracy = sum(e.key in truth for e in cmap.entries) / cmap.entry_count if cmap.entry_count else 0.0
    return Alignment(coverage, accuracy)


def make_record(run, knowledge_ref: str = "", backend_settings: Optional[dict] = None) -> dict:
    """Dataset record for one map-paradigm run (an ``EpisodeResult``)."""
    if run.mapping is None or run.cognitive_map is None:
        raise ExportError(f"{run.report.instruction.task_id}: export needs a mapping trajectory and a map")
    ins = run.report.instruction
    snap = mapping_snapshot(ins.env_id, ins.seed, run.template, run.mapping)
    al = alignment_of(run.cognitive_map, snap)
    rep = run.report
    return {
        "task_id": ins.task_id,
        "env_id": ins.env_id,
        "family": run.family or ins.env_id,
        "seed": ins.seed,
        "template": run.template,
        "instruction": ins.text,
        "stage1_knowledge_ref": knowledge_ref,
        "mapping_trajectory": trajectory_to_dict(run.mapping),
        "map": map_to_dict(run.cognitive_map),
        "execution_trajectory": trajectory_to_dict(run.acting),
        "success": rep.success,
        "steps": rep.mapping_steps + rep.acting_steps,
        "tokens": rep.tokens_total,
        "alignment": {"spatial_coverage": al.spatial_coverage, "factual_accuracy": al.factual_accuracy},
        "backend": backend_settings or {"kind": "oracle"},
    }


def dataset_stats(records: Iterable[dict]) -> dict:
    """Per-family trajectory count, mean steps and mean tokens (thousands), plus a total row."""
    groups: dict[str, list[dict]] = {}
    records = list(records)
    for r in records:
        groups.setdefault(r["family"], []).append(r)
    order = [f for f in FAMILIES if f in groups] + sorted(f for f in groups if f not in FAMILIES)

    def row(rs):
        n = len(rs)
        return {
            "# Traj.": n,
            "Avg. Steps": sum(r["steps"] for r in rs) / n if n else 0.0,
            "Avg. Tokens(k)": sum(r["tokens"] for r in rs) / n / 1000 if n else 0.0,
        }

    rows = {f: row(groups[f]) for f in order}
    rows["Total"] = row(records)
    return rows


def format_stats(stats: dict) -> str:
    lines = [" | ".join(STATS_COLUMNS)]
    for env, r in stats.items():
        lines.append(f"{env} | {r['# Traj.']} | {r['Avg. Steps']:.1f} | {r['Avg. Tokens(k)']:.2f}")
    return "\n".join(lines)


@dataclass(frozen=True)
class ExportResult:
    path: str
    n_runs: int
    n_kept: int
    stats: dict


def export_dataset(runs, path, thresholds: Thresholds = Thresholds(), knowledge_ref: str = "", backend_settings=None) -> ExportResult:
    """Write every run that clears both thresholds; return per-family stats."""
    runs = list(runs)
    kept = []
    for run in runs:
        rec = make_record(run, knowledge_ref, backend_settings)
        al = rec["alignment"]
        if Alignment(al["spatial_coverage"], al["factual_accuracy"]).passes(thresholds):
            kept.append(rec)
    head = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "records": len(kept),
        "thresholds": {"coverage_min": thresholds.coverage_min, "accuracy_min": thresholds.accuracy_min},
    }
    d = os.path.dirname(os.fspath(path))
    try:
        if d:
            os.makedirs(d, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for obj in [head, *kept]:
                fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":"), sort_keys=True) + "\n")
    except OSError as exc:
        raise ExportError(f"cannot write dataset to {path}: {exc}") from exc
    return ExportResult(os.fspath(path), len(runs), len(kept), dataset_stats(kept))


def read_dataset(path) -> tuple[dict, list[dict]]:
    with open(path, encoding="utf-8") as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    if not rows or rows[0].get("format") != DATASET_FORMAT or rows[0].get("version") != DATASET_VERSION:
        raise ExportError(f"{path} is not a version-{DATASET_VERSION} dataset file")
    head, records = rows[0], rows[1:]
    if head["records"] != len(records):
        raise ExportError(f"{path}: header announces {head['records']} records, found {len(records)}")
    return head, records


def revalidate(path) -> list[Alignment]:
    """Recompute every record's alignment from scratch (rebuilt world, replayed mapping)."""
    _, records = read_dataset(path)
    out = []
    for r in records:
        mapping = trajectory_from_dict(r["mapping_trajectory"])
        snap = mapping_snapshot(r["env_id"], r["seed"], r["template"], mapping)
        out.append(alignment_of(map_from_dict(r["map"]), snap))
    return out
