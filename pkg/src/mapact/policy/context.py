"""Inputs and outputs of a single policy call."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from ..core import Action, CognitiveMap, GlobalKnowledge, Instruction, KnowledgeEntry, StepRecord


class Role(str, Enum):
    FOCUS_ANALYZER = "focus_analyzer"
    EXPLORER = "explorer"
    REFLECTOR = "reflector"
    DISTILLER = "distiller"
    SCOUT = "scout"
    EXTRACTOR = "extractor"
    EXECUTOR_MAP = "executor_map"
    EXECUTOR_REACT = "executor_react"
    EXECUTOR_COMAP = "executor_comap"


EMITTING_ROLES = frozenset({Role.SCOUT.value, Role.EXPLORER.value})
# roles whose reply is text rather than an environment command
TEXT_ROLES = frozenset({Role.FOCUS_ANALYZER.value, Role.REFLECTOR.value, Role.DISTILLER.value, Role.EXTRACTOR.value})
OMITTABLE = frozenset({"knowledge", "map"})


class PolicyError(RuntimeError):
    pass


class BackendError(PolicyError):
    pass


@dataclass(frozen=True)
class PromptContext:
    role_template: str
    instruction: Instruction
    global_knowledge: Optional[GlobalKnowledge] = None
    cognitive_map: Optional[CognitiveMap] = None
    history: tuple[StepRecord, ...] = ()
    focus_points: Optional[tuple[str, ...]] = None
    # blocks an ablation removes from the executor_map prompt
    omit: frozenset = frozenset()

    def __post_init__(self):
        role = Role(self.role_template).value
        object.__setattr__(self, "role_template", role)
        object.__setattr__(self, "history", tuple(self.history))
        object.__setattr__(self, "omit", frozenset(self.omit))
        if self.focus_points is not None:
            object.__setattr__(self, "focus_points", tuple(self.focus_points))
        if not self.omit <= OMITTABLE:
            raise ValueError(f"unknown omitted blocks {sorted(self.omit - OMITTABLE)}")
        if role == Role.EXECUTOR_MAP.value:
            if self.global_knowledge is None and "knowledge" not in self.omit:
                raise ValueError("executor_map requires global_knowledge")
            if self.cognitive_map is None and "map" not in self.omit:
                raise ValueError("executor_map requires cognitive_map")
        elif self.omit:
            raise ValueError("only executor_map prompts may omit blocks")
        if role == Role.EXECUTOR_REACT.value and (self.global_knowledge is not None or self.cognitive_map is not None):
            raise ValueError("executor_react takes neither global_knowledge nor cognitive_map")

    @property
    def env_id(self) -> str:
        return self.instruction.env_id

    @property
    def shown_knowledge(self) -> Optional[GlobalKnowledge]:
        return None if "knowledge" in self.omit else self.global_knowledge

    @property
    def shown_map(self) -> Optional[CognitiveMap]:
        return None if "map" in self.omit else self.cognitive_map


@dataclass(frozen=True)
class PolicyDecision:
    action: Action
    thought: Optional[str] = None
    emitted_entries: tuple[KnowledgeEntry, ...] = ()
    tokens_in: int = 0
    tokens_out: int = 0
    role: str = Role.EXECUTOR_REACT.value

    def __post_init__(self):
        object.__setattr__(self, "emitted_entries", tuple(self.emitted_entries))
        if self.emitted_entries and self.role not in EMITTING_ROLES:
            raise ValueError(f"role {self.role} cannot emit map entries")
        if self.tokens_in < 0 or self.tokens_out < 0:
            raise ValueError("token counts must be nonnegative")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "oracle"
    endpoint: str = ""
    model_name: str = ""
    temperature: float = 0.0
    max_tokens: int = 512
    timeout: float = 30.0
    retry_count: int = 2
    # path of a recorded transcript; replayed instead of calling the endpoint
    transcript: str = ""
    record_to: str = ""

    def __post_init__(self):
        if self.kind not in ("oracle", "remote"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1 or self.retry_count < 0 or self.timeout <= 0:
            raise ValueError("max_tokens >= 1, retry_count >= 0 and timeout > 0 required")


@dataclass
class EnvHandle:
    """Live environment plus the per-episode tables an oracle keeps."""

    env: Any
    tables: dict = field(default_factory=dict)
