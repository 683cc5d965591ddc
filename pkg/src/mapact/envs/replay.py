"""Replay files: the full event log of one environment, re-executable bit for bit."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .base import Env, PerturbationSpec

REPLAY_FORMAT = "mapact/replay"
REPLAY_VERSION = 1


@dataclass(frozen=True)
class ReplayResult:
    ok: bool
    events: int
    mismatch_at: Optional[int] = None
    detail: str = ""


def dump_replay(env: Env) -> str:
    head = {"format": REPLAY_FORMAT, "version": REPLAY_VERSION, "env_id": env.env_id, "seed": env.seed, "template": env.template}
    lines = [head, *env.events, {"end": REPLAY_FORMAT}]
    return "".join(json.dumps(x, ensure_ascii=False, separators=(",", ":")) + "\n" for x in lines)


def write_replay(env: Env, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_replay(env))


def load_replay(text: str) -> tuple[dict, list[dict]]:
    rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    if not rows or rows[0].get("format") != REPLAY_FORMAT or rows[0].get("version") != REPLAY_VERSION:
        raise ValueError("not a replay file")
    if rows[-1] != {"end": REPLAY_FORMAT}:
        raise ValueError("truncated replay file")
    return rows[0], rows[1:-1]


def replay(text: str) -> ReplayResult:
    """Re-run a recorded event log and compare every observation byte for byte."""
    from . import make

    head, events = load_replay(text)
    env = make(head["env_id"], head["seed"], head["template"])
    for i, ev in enumerate(events):
        if "reset" in ev:
            _, obs = env.reset()
            got, want = obs.text, ev["observation"]
        elif "action" in ev:
            obs, _, _ = env.step(ev["action"])
            if obs.error_flag != ev["error"]:
                return ReplayResult(False, len(events), i, "error flag differs")
            got, want = obs.text, ev["observation"]
        elif ev.get("control") == "restart_level":
            got, want = env.restart_level().text, ev["observation"]
        elif ev.get("control") == "perturb":
            env.apply_perturbation(PerturbationSpec(ev["trigger_step"], tuple(tuple(r) for r in ev["relocations"])))
            continue
        else:
            return ReplayResult(False, len(events), i, f"unknown event {ev}")
        if got != want:
            return ReplayResult(False, len(events), i, "observation differs")
    return ReplayResult(True, len(events))
