"""Map-QA: environment-probing questions with gold answers from the engine.

Questions come only from a ground-truth snapshot and answers only from a
cognitive map, so the score measures what the map knows.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from ..envs import GroundTruthSnapshot
from ..envs.house import obj_class

CATEGORIES = ("object_location", "affordance", "negative", "task_reasoning")
UNKNOWN = "unknown"


@dataclass(frozen=True)
class QAItem:
    category: str
    question: str
    gold: str
    predicted: Optional[str] = None
    # lookup key the answerer uses against map entries
    key: tuple = ()

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown QA category {self.category!r}")
        object.__setattr__(self, "key", tuple(self.key))

    @property
    def correct(self) -> bool:
        return self.predicted == self.gold


@dataclass(frozen=True)
class QAResult:
    items: tuple[QAItem, ...]

    def accuracy(self) -> dict[str, Optional[float]]:
        """Per-category accuracy; None for a category without questions."""
        out = {}
        for cat in CATEGORIES:
            xs = [i for i in self.items if i.category == cat]
            out[cat] = sum(i.correct for i in xs) / len(xs) if xs else None
        return out

    def counts(self) -> dict[str, int]:
        return {cat: sum(i.category == cat for i in self.items) for cat in CATEGORIES}


def _relevant(snapshot: GroundTruthSnapshot):
    """(match mode, relevant names, excluded location) for the task-reasoning rule."""
    task = snapshot.task
    if snapshot.env_id == "house":
        return "class", (task["target_class"],), task["dest"]
    if snapshot.env_id == "craft":
        return "name", tuple(sorted(task["raws"])), ""
    return "name", ("target",), ""


def _matches(mode: str, subject: str, names) -> bool:
    return (obj_class(subject) if mode == "class" else subject) in names


def first_relevant_location(locations: dict[str, str], mode: str, names, exclude: str) -> Optional[str]:
    """The fixed task-reasoning rule: smallest location holding a task-relevant object."""
    hits = sorted(loc for subj, loc in locations.items() if _matches(mode, subj, names) and loc != exclude)
    return hits[0] if hits else None


def generate_qa(snapshot: GroundTruthSnapshot, map_env: Optional[str] = None) -> list[QAItem]:
    """Exhaustive, deterministic question set for one snapshot."""
    if map_env is not None and map_env != snapshot.env_id:
        raise ValueError(f"snapshot of {snapshot.env_id} cannot probe a {map_env} map")
    items: list[QAItem] = []
    where = {}
    for f in snapshot.facts:
        if f.kind == "spatial" and f.relation == "at" and f.object != "inventory":
            where[f.subject] = f.object
            items.append(QAItem("object_location", f"Where is the {f.subject}?", f.object, key=(f.subject,)))
    for f in snapshot.facts:
        if f.kind == "affordance" and f.relation != "state":
            q = f"What does '{f.relation}' do with the {f.subject}?"
            items.append(QAItem("affordance", q, f.object, key=(f.subject, f.relation)))
    for f in snapshot.facts:
        if f.kind == "negative":
            items.append(QAItem("negative", f"Is there a {f.subject} in the {f.object}?", "no", key=(f.subject, f.object)))
    mode, names, exclude = _relevant(snapshot)
    gold = first_relevant_location(where, mode, names, exclude)
    if gold is not None:
        q = f"Which location should the agent visit first to find {', '.join(names)}?"
        items.append(QAItem("task_reasoning", q, gold, key=(mode, names, exclude)))
    return items


def answer_item(cmap, item: QAItem) -> str:
    entries = cmap.entries
    if item.category == "object_location":
        (subj,) = item.key
        hits = sorted(e.object for e in entries if e.kind == "spatial" and e.relation == "at" and e.subject == subj)
        return hits[0] if len(hits) == 1 else UNKNOWN
    if item.category == "affordance":
        subj, rel = item.key
        hits = sorted(e.object for e in entries if e.kind == "affordance" and e.subject == subj and e.relation == rel)
        return hits[0] if len(hits) == 1 else UNKNOWN
    if item.category == "negative":
        subj, loc = item.key
        if any(e.kind == "negative" and e.subject == subj and e.relation == "not_in" and e.object == loc for e in entries):
            return "no"
        for e in entries:
            if e.kind == "spatial" and e.relation == "at" and e.object == loc and subj in (e.subject, obj_class(e.subject)):
                return "yes"
        return UNKNOWN
    mode, names, exclude = item.key
    where = {e.subject: e.object for e in entries if e.kind == "spatial" and e.relation == "at"}
    return first_relevant_location(where, mode, names, exclude) or UNKNOWN


def answer_qa_from_map(cmap, items) -> QAResult:
    """Answer every item from map entries alone; absent knowledge answers 'unknown'."""
    return QAResult(tuple(replace(i, predicted=answer_item(cmap, i)) for i in items))
