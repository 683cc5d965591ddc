"""Shared domain types, observation canonicalization and serialization.

Every value here is immutable once built. Stage runners and builders return
new values instead of mutating, so trajectories, maps and knowledge bases can
be handed between worker processes freely.
"""

from __future__ import annotations

import hashlib
import json
import string
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Optional

FORMAT_VERSION = 1
MAX_GLOBAL_RULES = 15

_ARTICLES = frozenset({"a", "an", "the"})
_TRAILING = string.punctuation + " "


class EnvId(str, Enum):
    HOUSE = "house"
    CRAFT = "craft"
    GRID = "grid"


class ActionKind(str, Enum):
    NAVIGATE = "navigate"
    INTERACT = "interact"
    OBSERVE = "observe"
    CRAFT = "craft"
    GRID_ACTION = "grid_action"
    NOOP = "noop"


class Stage(str, Enum):
    GLOBAL_EXPLORE = "global_explore"
    TASK_MAP = "task_map"
    ACT = "act"


class EntryKind(str, Enum):
    SPATIAL = "spatial"
    AFFORDANCE = "affordance"
    RULE = "rule"
    NEGATIVE = "negative"


class Confidence(str, Enum):
    OBSERVED = "observed"
    INFERRED = "inferred"


class ParseError(ValueError):
    """Malformed serialized input. ``offset`` is the byte offset of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class EnvMismatchError(ValueError):
    pass


# ---------------------------------------------------------------------------
# canonicalization


def canonical_text(text: str) -> str:
    s = text.lower()
    while True:
        tokens = [t for t in s.split() if t not in _ARTICLES]
        nxt = " ".join(tokens).rstrip(_TRAILING)
        if nxt == s:
            return s
        s = nxt


def stable_hash64(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


def canonicalize_observation(text: str) -> tuple[str, int]:
    """Return the canonical form of an observation and its 64-bit key.

    Lowercases, collapses whitespace, drops the articles "a", "an", "the" and
    strips trailing punctuation, repeating until nothing changes so the result
    is a fixpoint. The key is a blake2b digest and does not depend on the
    interpreter's hash seed.
    """
    canon = canonical_text(text)
    return canon, stable_hash64(canon)


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Instruction:
    text: str
    env_id: str
    task_id: str
    seed: int
    template: str = ""

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("instruction text must be non-empty")
        object.__setattr__(self, "env_id", EnvId(self.env_id).value)
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class Action:
    text: str
    kind: str = ActionKind.NOOP.value

    def __post_init__(self):
        norm = normalize_ws(self.text)
        if not norm:
            raise ValueError("action text must be non-empty")
        object.__setattr__(self, "text", norm)
        object.__setattr__(self, "kind", ActionKind(self.kind).value)


@dataclass(frozen=True)
class Observation:
    text: str
    canonical_key: int
    step_index: int
    error_flag: bool = False

    @classmethod
    def make(cls, text: str, step_index: int, error_flag: bool = False) -> "Observation":
        return cls(text, canonicalize_observation(text)[1], step_index, error_flag)


@dataclass(frozen=True)
class StepRecord:
    action: Action
    observation: Observation
    stage: str
    thought: Optional[str] = None
    tokens_in: int = 0
    tokens_out: int = 0

    def __post_init__(self):
        object.__setattr__(self, "stage", Stage(self.stage).value)
        if self.tokens_in < 0 or self.tokens_out < 0:
            raise ValueError("token counts must be nonnegative")


@dataclass(frozen=True)
class Trajectory:
    traj_id: str
    instruction: Instruction
    steps: tuple[StepRecord, ...] = ()
    initial_observation: Optional[Observation] = None
    terminal_success: Optional[bool] = None

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        last = -1 if self.initial_observation is None else self.initial_observation.step_index
        for rec in self.steps:
            if rec.observation.step_index <= last:
                raise ValueError("step indices must be strictly increasing")
            last = rec.observation.step_index

    def __len__(self) -> int:
        return len(self.steps)

    def with_steps(self, steps: Iterable[StepRecord], terminal_success: Optional[bool] = None) -> "Trajectory":
        return Trajectory(self.traj_id, self.instruction, tuple(steps), self.initial_observation, terminal_success)

    def tokens(self) -> int:
        return sum(s.tokens_in + s.tokens_out for s in self.steps)


@dataclass(frozen=True)
class KnowledgeEntry:
    kind: str
    subject: str
    relation: str
    object: str
    source_step: int = 0
    confidence: str = Confidence.OBSERVED.value

    def __post_init__(self):
        object.__setattr__(self, "kind", EntryKind(self.kind).value)
        object.__setattr__(self, "confidence", Confidence(self.confidence).value)

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.kind, self.subject, self.relation, self.object)


@dataclass(frozen=True)
class CognitiveMap:
    """Structured task map. Entries are unique on ``(kind, subject, relation, object)``."""

    env_id: str
    entries: tuple[KnowledgeEntry, ...] = ()
    built_from: str = ""

    def __post_init__(self):
        seen: dict[tuple, KnowledgeEntry] = {}
        for e in self.entries:
            seen.setdefault(e.key, e)
        object.__setattr__(self, "entries", tuple(seen[k] for k in sorted(seen)))

    @property
    def entry_count(self) -> int:
        return len(self.entries)

    def keys(self) -> frozenset:
        return frozenset(e.key for e in self.entries)

    def merged(self, new: Iterable[KnowledgeEntry]) -> "CognitiveMap":
        return CognitiveMap(self.env_id, self.entries + tuple(new), self.built_from)

    def of_kind(self, *kinds: str) -> list[KnowledgeEntry]:
        return [e for e in self.entries if e.kind in kinds]

    def without_kinds(self, *kinds: str) -> "CognitiveMap":
        return CognitiveMap(self.env_id, tuple(e for e in self.entries if e.kind not in kinds), self.built_from)


@dataclass(frozen=True)
class Rule:
    statement: str
    evidence: tuple[tuple[str, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "evidence", tuple((str(t), int(s)) for t, s in self.evidence))
        if not self.evidence:
            raise ValueError(f"rule without evidence: {self.statement!r}")


@dataclass(frozen=True)
class GlobalKnowledge:
    env_id: str
    action_syntax: tuple[Rule, ...] = ()
    interaction_rules: tuple[Rule, ...] = ()
    error_patterns: tuple[Rule, ...] = ()

    def __post_init__(self):
        for name in ("action_syntax", "interaction_rules", "error_patterns"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.rule_count > MAX_GLOBAL_RULES:
            raise ValueError(f"global knowledge holds {self.rule_count} rules (max {MAX_GLOBAL_RULES})")

    @property
    def rule_count(self) -> int:
        return len(self.action_syntax) + len(self.interaction_rules) + len(self.error_patterns)

    def all_rules(self) -> list[Rule]:
        return [*self.action_syntax, *self.interaction_rules, *self.error_patterns]


@dataclass(frozen=True)
class EpisodeReport:
    instruction: Instruction
    success: bool
    mapping_steps: int
    acting_steps: int
    tokens_total: int
    rollout_length: int
    t_perturb: Optional[int] = None
    reexplored: Optional[bool] = None
    paradigm: str = "map"
    tokens_map: int = 0
    tokens_act: int = 0
    max_level: Optional[int] = None
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "notes", tuple(self.notes))
        if self.rollout_length < self.acting_steps:
            raise ValueError("rollout_length must cover the acting steps")
        if self.t_perturb is not None and not 0 <= self.t_perturb < max(self.rollout_length, 1):
            raise ValueError("t_perturb must lie inside the rollout")

    @property
    def perturbed(self) -> bool:
        return self.t_perturb is not None


def map_diff_count(current: CognitiveMap, previous: CognitiveMap) -> int:
    if current.env_id != previous.env_id:
        raise EnvMismatchError(f"maps from different environments: {current.env_id} vs {previous.env_id}")
    return current.entry_count - previous.entry_count


# ---------------------------------------------------------------------------
# dict conversion


def _instruction_to(d: Instruction) -> dict:
    return {"text": d.text, "env_id": d.env_id, "task_id": d.task_id, "seed": d.seed, "template": d.template}


def _instruction_from(d: dict) -> Instruction:
    return Instruction(d["text"], d["env_id"], d["task_id"], int(d["seed"]), d.get("template", ""))


def _obs_to(o: Observation) -> dict:
    return {"text": o.text, "canonical_key": o.canonical_key, "step_index": o.step_index, "error_flag": o.error_flag}


def _obs_from(d: dict) -> Observation:
    return Observation(d["text"], int(d["canonical_key"]), int(d["step_index"]), bool(d["error_flag"]))


def _step_to(s: StepRecord) -> dict:
    return {
        "action": {"text": s.action.text, "kind": s.action.kind},
        "observation": _obs_to(s.observation),
        "stage": s.stage,
        "thought": s.thought,
        "tokens_in": s.tokens_in,
        "tokens_out": s.tokens_out,
    }


def _step_from(d: dict) -> StepRecord:
    return StepRecord(
        Action(d["action"]["text"], d["action"]["kind"]),
        _obs_from(d["observation"]),
        d["stage"],
        d.get("thought"),
        int(d["tokens_in"]),
        int(d["tokens_out"]),
    )


def entry_to_dict(e: KnowledgeEntry) -> dict:
    return {
        "kind": e.kind,
        "subject": e.subject,
        "relation": e.relation,
        "object": e.object,
        "source_step": e.source_step,
        "confidence": e.confidence,
    }


def entry_from_dict(d: dict) -> KnowledgeEntry:
    return KnowledgeEntry(d["kind"], d["subject"], d["relation"], d["object"], int(d["source_step"]), d["confidence"])


def _rule_to(r: Rule) -> dict:
    return {"statement": r.statement, "evidence": [list(p) for p in r.evidence]}


def _rule_from(d: dict) -> Rule:
    return Rule(d["statement"], tuple((p[0], p[1]) for p in d["evidence"]))


def report_to_dict(r: EpisodeReport) -> dict:
    return {
        "instruction": _instruction_to(r.instruction),
        "success": r.success,
        "mapping_steps": r.mapping_steps,
        "acting_steps": r.acting_steps,
        "tokens_total": r.tokens_total,
        "rollout_length": r.rollout_length,
        "t_perturb": r.t_perturb,
        "reexplored": r.reexplored,
        "paradigm": r.paradigm,
        "tokens_map": r.tokens_map,
        "tokens_act": r.tokens_act,
        "max_level": r.max_level,
        "notes": list(r.notes),
    }


def report_from_dict(d: dict) -> EpisodeReport:
    return EpisodeReport(
        _instruction_from(d["instruction"]),
        bool(d["success"]),
        int(d["mapping_steps"]),
        int(d["acting_steps"]),
        int(d["tokens_total"]),
        int(d["rollout_length"]),
        d["t_perturb"],
        d["reexplored"],
        d["paradigm"],
        int(d["tokens_map"]),
        int(d["tokens_act"]),
        d["max_level"],
        tuple(d["notes"]),
    )


def map_to_dict(m: CognitiveMap) -> dict:
    return {
        "env_id": m.env_id,
        "built_from": m.built_from,
        "entry_count": m.entry_count,
        "entries": [entry_to_dict(e) for e in m.entries],
    }


def map_from_dict(d: dict) -> CognitiveMap:
    m = CognitiveMap(d["env_id"], tuple(entry_from_dict(e) for e in d["entries"]), d["built_from"])
    if m.entry_count != d["entry_count"]:
        raise ValueError("entry_count does not match entries")
    return m


def knowledge_to_dict(k: GlobalKnowledge) -> dict:
    return {
        "env_id": k.env_id,
        "action_syntax": [_rule_to(r) for r in k.action_syntax],
        "interaction_rules": [_rule_to(r) for r in k.interaction_rules],
        "error_patterns": [_rule_to(r) for r in k.error_patterns],
    }


def knowledge_from_dict(d: dict) -> GlobalKnowledge:
    return GlobalKnowledge(
        d["env_id"],
        tuple(_rule_from(r) for r in d["action_syntax"]),
        tuple(_rule_from(r) for r in d["interaction_rules"]),
        tuple(_rule_from(r) for r in d["error_patterns"]),
    )


def trajectory_head(t: Trajectory) -> dict:
    return {
        "traj_id": t.traj_id,
        "instruction": _instruction_to(t.instruction),
        "initial_observation": None if t.initial_observation is None else _obs_to(t.initial_observation),
        "terminal_success": t.terminal_success,
    }


def trajectory_to_dict(t: Trajectory) -> dict:
    return {**trajectory_head(t), "steps": [_step_to(s) for s in t.steps]}


def trajectory_from_dict(d: dict) -> Trajectory:
    init = d["initial_observation"]
    return Trajectory(
        d["traj_id"],
        _instruction_from(d["instruction"]),
        tuple(_step_from(s) for s in d["steps"]),
        None if init is None else _obs_from(init),
        d["terminal_success"],
    )


# ---------------------------------------------------------------------------
# byte streams

_LINE_FORMATS = {"trajectory": Trajectory, "report": EpisodeReport}
_DOC_FORMATS = {"cognitive_map": CognitiveMap, "global_knowledge": GlobalKnowledge}


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def serialize(value: Any) -> bytes:
    """Encode a core value as bytes.

    Trajectories and reports are line-delimited: a header line carrying the
    format name, version and record count, the records, and an end marker.
    Maps and knowledge bases are single JSON documents with the same header
    fields inline.
    """
    if isinstance(value, Trajectory):
        lines = [{"format": "mapact/trajectory", "version": FORMAT_VERSION, "records": len(value.steps) + 1}]
        lines.append(trajectory_head(value))
        lines.extend(_step_to(s) for s in value.steps)
        lines.append({"end": "mapact/trajectory"})
    elif isinstance(value, EpisodeReport):
        lines = [{"format": "mapact/report", "version": FORMAT_VERSION, "records": 1}]
        lines.append(report_to_dict(value))
        lines.append({"end": "mapact/report"})
    elif isinstance(value, CognitiveMap):
        return (_dumps({"format": "mapact/cognitive_map", "version": FORMAT_VERSION, **map_to_dict(value)}) + "\n").encode()
    elif isinstance(value, GlobalKnowledge):
        return (
            _dumps({"format": "mapact/global_knowledge", "version": FORMAT_VERSION, **knowledge_to_dict(value)}) + "\n"
        ).encode()
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")
    return "".join(_dumps(line) + "\n" for line in lines).encode("utf-8")


def _json_error(data: bytes, base: int, exc: json.JSONDecodeError, text: str) -> ParseError:
    return ParseError(f"invalid JSON: {exc.msg}", base + len(text[: exc.pos].encode("utf-8")))


def deserialize(data: bytes) -> Any:
    """Inverse of :func:`serialize`. Raises :class:`ParseError` on any defect."""
    if not data:
        raise ParseError("empty input", 0)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("invalid UTF-8", exc.start) from None
    first_nl = text.find("\n")
    first = text if first_nl < 0 else text[:first_nl]
    try:
        head = json.loads(first)
    except json.JSONDecodeError as exc:
        raise _json_error(data, 0, exc, first) from None
    if not isinstance(head, dict) or "format" not in head:
        raise ParseError("missing format header", 0)
    fmt = str(head["format"]).removeprefix("mapact/")
    if head.get("version") != FORMAT_VERSION:
        raise ParseError(f"unsupported version {head.get('version')!r}", 0)
    try:
        if fmt in _DOC_FORMATS:
            if text[first_nl + 1 :].strip():
                raise ParseError("trailing data after document", len(first.encode()) + 1)
            return map_from_dict(head) if fmt == "cognitive_map" else knowledge_from_dict(head)
        if fmt not in _LINE_FORMATS:
            raise ParseError(f"unknown format {head['format']!r}", 0)
        return _read_lines(data, text, head, fmt)
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"invalid {fmt} content: {exc}", 0) from None


def _read_lines(data: bytes, text: str, head: dict, fmt: str) -> Any:
    raw_lines = text.split("\n")
    offsets = []
    pos = 0
    for line in raw_lines:
        offsets.append(pos)
        pos += len(line.encode("utf-8")) + 1
    expected = int(head["records"])
    if len(raw_lines) < expected + 3:
        raise ParseError("truncated stream", len(data))
    records = []
    for i in range(1, expected + 2):
        try:
            records.append(json.loads(raw_lines[i]))
        except json.JSONDecodeError as exc:
            raise _json_error(data, offsets[i], exc, raw_lines[i]) from None
    end = records.pop()
    if end != {"end": f"mapact/{fmt}"}:
        raise ParseError("missing end marker", offsets[expected + 1])
    if any(s.strip() for s in raw_lines[expected + 2 :]):
        raise ParseError("trailing data after end marker", offsets[expected + 2])
    if fmt == "report":
        return report_from_dict(records[0])
    h = records[0]
    init = h["initial_observation"]
    return Trajectory(
        h["traj_id"],
        _instruction_from(h["instruction"]),
        tuple(_step_from(r) for r in records[1:]),
        None if init is None else _obs_from(init),
        h["terminal_success"],
    )


def write_records(path, values: Iterable[Any]) -> None:
    """Write several reports or trajectories as JSON lines, one per value."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in values:
            if isinstance(v, EpisodeReport):
                fh.write(_dumps({"format": "mapact/report", "version": FORMAT_VERSION, **report_to_dict(v)}) + "\n")
            elif isinstance(v, Trajectory):
                fh.write(_dumps({"format": "mapact/trajectory", "version": FORMAT_VERSION, **trajectory_to_dict(v)}) + "\n")
            else:
                raise TypeError(type(v).__name__)


def read_records(path) -> list[Any]:
    out = []
    with open(path, "rb") as fh:
        offset = 0
        for raw in fh:
            if raw.strip():
                try:
                    d = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON: {exc.msg}", offset + exc.pos) from None
                fmt = d.get("format", "")
                if fmt == "mapact/report":
                    out.append(report_from_dict(d))
                elif fmt == "mapact/trajectory":
                    out.append(trajectory_from_dict(d))
                else:
                    raise ParseError(f"unknown record format {fmt!r}", offset)
            offset += len(raw)
    return out


def whitespace_tokens(text: str) -> int:
    return len(text.split())
