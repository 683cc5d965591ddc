"""Common environment machinery: seeding, snapshots, perturbation specs, event log."""

from __future__ import annotations

import copy
import hashlib
import random
from dataclasses import dataclass, field
from typing import Any, Optional

from ..core import Action, Instruction, KnowledgeEntry, Observation


class EnvError(RuntimeError):
    """Contract violation: stepping a terminal env, bad perturbation, ..."""


class GenerationError(RuntimeError):
    pass


GENERATION_RETRIES = 16


def derive_seed(seed: int, *labels: Any) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for lab in labels:
        h.update(b"\x1f" + str(lab).encode())
    return int.from_bytes(h.digest(), "big")


def rng_for(seed: int, *labels: Any) -> random.Random:
    return random.Random(derive_seed(seed, *labels))


@dataclass(frozen=True)
class PerturbationSpec:
    trigger_step: int
    relocations: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "relocations", tuple(tuple(r) for r in self.relocations))
        if self.trigger_step < 1:
            raise ValueError("trigger_step must be >= 1")
        if not self.relocations:
            raise ValueError("perturbation relocates nothing")


@dataclass(frozen=True)
class GroundTruthSnapshot:
    env_id: str
    seed: int
    step: int
    state: dict
    facts: tuple[KnowledgeEntry, ...]
    explored: tuple[str, ...]
    task: dict = field(default_factory=dict)

    def fact_keys(self) -> frozenset:
        return frozenset(f.key for f in self.facts)

    def of_kind(self, kind: str) -> list[KnowledgeEntry]:
        return [f for f in self.facts if f.kind == kind]


def fact(kind: str, subject: str, relation: str, obj: str, step: int = 0) -> KnowledgeEntry:
    return KnowledgeEntry(kind, subject, relation, obj, step, "observed")


class Env:
    """Single-owner simulator. Subclasses implement the ``_``-prefixed hooks."""

    env_id = ""
    templates: tuple[str, ...] = ()

    def __init__(self, seed: int, template: str):
        if template not in self.templates:
            raise ValueError(f"template {template!r} not in {self.env_id} family {self.templates}")
        self.seed = int(seed)
        self.template = template
        self.step_counter = 0
        self.done = False
        self.success = False
        self.events: list[dict] = []
        self.instruction: Optional[Instruction] = None
        self.last_observation: Optional[Observation] = None
        self._generate_checked()

    def _generate_checked(self) -> None:
        for attempt in range(GENERATION_RETRIES):
            self._generate(rng_for(self.seed, self.env_id, self.template, attempt))
            if self._solvable():
                self.generation_attempt = attempt
                return
        raise GenerationError(f"no solvable {self.env_id}/{self.template} world for seed {self.seed}")

    # hooks -----------------------------------------------------------------
    def _generate(self, rng: random.Random) -> None:
        raise NotImplementedError

    def _solvable(self) -> bool:
        raise NotImplementedError

    def _instruction_text(self) -> str:
        raise NotImplementedError

    def _initial_text(self) -> str:
        raise NotImplementedError

    def _apply(self, text: str) -> tuple[str, bool]:
        """Execute a command; return (observation text, error flag)."""
        raise NotImplementedError

    def _admissible(self) -> list[str]:
        raise NotImplementedError

    def _relocate(self, obj: str, dest: str) -> None:
        raise NotImplementedError

    def _facts(self, explored) -> list[KnowledgeEntry]:
        raise NotImplementedError

    def _state(self) -> dict:
        raise NotImplementedError

    def _task_info(self) -> dict:
        return {}

    def perception(self) -> dict:
        raise NotImplementedError

    def state_key(self):
        raise NotImplementedError

    @classmethod
    def action_template(cls, text: str) -> str:
        raise NotImplementedError

    @classmethod
    def action_kind(cls, text: str) -> str:
        raise NotImplementedError

    # public API ------------------------------------------------------------
    def reset(self) -> tuple[Instruction, Observation]:
        """Initial instruction and observation. Only valid before the first step."""
        if self.step_counter:
            raise EnvError("reset after stepping; build a fresh env instead")
        self.instruction = Instruction(self._instruction_text(), self.env_id, f"{self.env_id}-{self.template}-{self.seed}", self.seed, self.template)
        obs = Observation.make(self._initial_text(), 0, False)
        self.last_observation = obs
        self.events = [{"reset": {"env_id": self.env_id, "seed": self.seed, "template": self.template}, "observation": obs.text}]
        return self.instruction, obs

    def step(self, action) -> tuple[Observation, bool, bool]:
        if self.done:
            raise EnvError("step on a terminal environment")
        if self.instruction is None:
            self.reset()
        text = action.text if isinstance(action, Action) else " ".join(str(action).split())
        out, err = self._apply(text)
        self.step_counter += 1
        obs = Observation.make(out, self.step_counter, err)
        self.last_observation = obs
        self.events.append({"action": text, "observation": out, "error": err})
        return obs, self.done, self.success

    def admissible_actions(self) -> list[Action]:
        if self.done:
            return []
        return [Action(a, self.action_kind(a)) for a in sorted(set(self._admissible()))]

    def apply_perturbation(self, spec: PerturbationSpec) -> None:
        if spec.trigger_step != self.step_counter:
            raise EnvError(f"perturbation for step {spec.trigger_step} applied at step {self.step_counter}")
        for obj, dest in spec.relocations:
            self._relocate(obj, dest)
        self.events.append({"control": "perturb", "trigger_step": spec.trigger_step, "relocations": [list(r) for r in spec.relocations]})

    def ground_truth(self, explored=None) -> GroundTruthSnapshot:
        facts = self._facts(explored)
        uniq = {f.key: f for f in facts}
        state = self._state()
        return GroundTruthSnapshot(
            self.env_id,
            self.seed,
            self.step_counter,
            state,
            tuple(uniq[k] for k in sorted(uniq)),
            tuple(sorted(self._explored_set(explored))),
            self._task_info(),
        )

    def _explored_set(self, explored) -> list[str]:
        return list(explored) if explored is not None else []

    def clone(self) -> "Env":
        return copy.deepcopy(self)
