"""Stage 1: cross-task exploration and distillation into global knowledge."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

from ..core import MAX_GLOBAL_RULES, GlobalKnowledge, Rule, StepRecord, Trajectory, canonical_text
from ..envs import FAMILIES, env_class, make, template_for

DEFAULT_STAGE1_BUDGET = 40
UNRECOGNIZED = "<unrecognized>"


@dataclass(frozen=True)
class Stage1Result:
    knowledge: GlobalKnowledge
    trajectories: tuple[Trajectory, ...]
    focus_points: tuple[tuple[str, str], ...] = ()

    def __iter__(self):
        return iter((self.knowledge, self.trajectories))


class Stage1Error(RuntimeError):
    """Stage 1 stopped early; ``partial`` holds the trajectories finished so far."""

    def __init__(self, message: str, partial=()):
        super().__init__(message)
        self.partial = tuple(partial)


def _failure_signature(text: str) -> str:
    return canonical_text(text.split("\n", 1)[0])


def distill_oracle(env_id: str, trajectories: Sequence[Trajectory]) -> GlobalKnowledge:
    """Deterministic distillation.

    * syntax: every command form the env accepted;
    * interaction rules: a command form that failed and later succeeded, with
      the last state-changing command in between as the precondition;
    * error patterns: failures sharing command form and reply, seen at least twice.

    At most 15 rules survive, by evidence count descending and then statement.
    """
    cls = env_class(env_id)
    syntax: dict[str, list] = defaultdict(list)
    interaction: dict[str, list] = defaultdict(list)
    errors: dict[tuple, list] = defaultdict(list)
    for traj in trajectories:
        steps = traj.steps
        for i, rec in enumerate(steps):
            tpl = cls.action_template(rec.action.text)
            ev = (traj.traj_id, rec.observation.step_index)
            if tpl == UNRECOGNIZED:
                continue
            if not rec.observation.error_flag:
                syntax[f"use the exact form '{tpl}'"].append(ev)
                continue
            errors[(tpl, _failure_signature(rec.observation.text))].append(ev)
            later = next(
                (j for j in range(i + 1, len(steps)) if steps[j].action.text == rec.action.text and not steps[j].observation.error_flag),
                None,
            )
            if later is None:
                continue
            between = [s for s in steps[i + 1 : later] if not s.observation.error_flag and s.action.kind != "observe"]
            if not between:
                continue
            acting = [s for s in between if s.action.kind != "navigate"]
            pre = (acting or between)[-1]
            interaction[f"'{tpl}' may fail until '{cls.action_template(pre.action.text)}' has been done"].append(ev)
    pool = [("action_syntax", st, ev) for st, ev in syntax.items()]
    pool += [("interaction_rules", st, ev) for st, ev in interaction.items()]
    pool += [("error_patterns", f"'{tpl}' can fail with '{sig}'", ev) for (tpl, sig), ev in errors.items() if len(ev) >= 2]
    return _capped(env_id, pool)


def _capped(env_id: str, pool) -> GlobalKnowledge:
    merged: dict[tuple, list] = {}
    for section, statement, ev in pool:
        merged.setdefault((section, statement), []).extend(ev)
    ranked = sorted(merged.items(), key=lambda kv: (-len(set(kv[1])), kv[0][1], kv[0][0]))[:MAX_GLOBAL_RULES]
    sections: dict[str, list[Rule]] = {"action_syntax": [], "interaction_rules": [], "error_patterns": []}
    for (section, statement), ev in ranked:
        sections[section].append(Rule(statement, tuple(sorted(set(ev)))))
    return GlobalKnowledge(env_id, **sections)


def distill_global(trajectories: Sequence[Trajectory], backend=None) -> GlobalKnowledge:
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("distillation needs at least one trajectory")
    env_id = trajectories[0].instruction.env_id
    if any(t.instruction.env_id != env_id for t in trajectories):
        raise ValueError("trajectories from different environments")
    if backend is not None and getattr(backend, "kind", "oracle") == "remote":
        from ..policy.parse import parse_rule_sections
        from ..policy.remote import distill_reply, rules_from_reply

        reply = distill_reply(backend, trajectories, trajectories[0].instruction)
        sections = rules_from_reply(parse_rule_sections(reply), trajectories)
        pool = [(name, r.statement, list(r.evidence)) for name, rules in sections.items() for r in rules]
        return _capped(env_id, pool)
    return distill_oracle(env_id, trajectories)


def _explore_instance(env, instruction, opening, focus, backend, budget: int) -> Trajectory:
    from ..policy import HISTORY_WINDOW, EnvHandle, PromptContext, Role, decide

    handle = EnvHandle(env, {})
    steps: list[StepRecord] = []
    while len(steps) < budget and not env.done:
        history = tuple(steps[-HISTORY_WINDOW:])
        ctx = PromptContext(Role.EXPLORER.value, instruction, history=history, focus_points=focus)
        d = decide(ctx, backend, handle)
        obs, _, _ = env.step(d.action)
        rec = StepRecord(d.action, obs, "global_explore", d.thought, d.tokens_in, d.tokens_out)
        if obs.error_flag:
            rctx = PromptContext(Role.REFLECTOR.value, instruction, history=history + (rec,))
            r = decide(rctx, backend, handle)
            thought = f"{d.thought or ''} | reflection: {r.thought or ''}".strip()
            rec = StepRecord(d.action, obs, "global_explore", thought, d.tokens_in + r.tokens_in, d.tokens_out + r.tokens_out)
        steps.append(rec)
    success = env.success
    return Trajectory(f"stage1/{instruction.task_id}", instruction, tuple(steps), opening, bool(success))


def derive_focus_points(family: str, manual: Sequence[Trajectory] = (), backend=None) -> tuple[tuple[str, str], ...]:
    """Focus points from the environment description and the manual example steps."""
    from ..policy import PromptContext, Role, decide
    from ..policy.parse import parse_focus_points

    env_id = FAMILIES[family][0]
    probe = make(env_id, 0, template_for(family, 0))
    instruction, _ = probe.reset()
    steps = tuple(s for t in manual for s in t.steps)
    ctx = PromptContext(Role.FOCUS_ANALYZER.value, instruction, history=steps)
    pairs = parse_focus_points(decide(ctx, backend).thought or "")
    if not pairs:
        raise Stage1Error("focus analyzer produced no focus points")
    return tuple(pairs)


def run_stage1(
    family: str,
    train_seeds: Sequence[int],
    backend=None,
    manual: Sequence[Trajectory] = (),
    budget: int = DEFAULT_STAGE1_BUDGET,
) -> Stage1Result:
    """Explore every training instance, keep all trajectories, distill them once."""
    if family not in FAMILIES:
        raise ValueError(f"unknown task family {family!r}")
    seeds = list(train_seeds)
    if not seeds:
        raise ValueError("Stage 1 needs at least one training instance")
    if budget < 1:
        raise ValueError("Stage 1 budget must be >= 1")
    from ..policy import BackendError

    env_id = FAMILIES[family][0]
    focus = derive_focus_points(family, manual, backend)
    shown = tuple(p for _, p in focus)
    trajectories: list[Trajectory] = []
    for seed in seeds:
        env = make(env_id, seed, template_for(family, seed))
        instruction, opening = env.reset()
        try:
            trajectories.append(_explore_instance(env, instruction, opening, shown, backend, budget))
        except BackendError as exc:
            raise Stage1Error(f"backend failed on seed {seed}: {exc}", trajectories) from exc
    return Stage1Result(distill_global(trajectories, backend), tuple(trajectories), focus)
