"""Stage 2: adaptive task exploration under the dual-convergence stopping rule."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..core import CognitiveMap, GlobalKnowledge, Instruction, Observation, StepRecord, Trajectory
from .extract import build_map, make_extractor
from .stopping import ConvergenceTrace, StopDecision, StoppingParams


@dataclass(frozen=True)
class Stage2Result:
    cognitive_map: CognitiveMap
    trajectory: Trajectory
    trace: ConvergenceTrace
    # the env ended during mapping (grid game over); the map covers the partial run
    terminal: bool = False

    def __iter__(self):
        return iter((self.cognitive_map, self.trajectory, self.trace))


def run_stage2(
    instruction: Instruction,
    env,
    knowledge: Optional[GlobalKnowledge],
    backend=None,
    params: StoppingParams = StoppingParams(),
    step_budget: Optional[int] = None,
    opening: Optional[Observation] = None,
) -> Stage2Result:
    """Explore ``env`` (already reset) until the stopping rule fires.

    Each step: scout decision, env step, visit count on the canonical key,
    map growth from the exact parser, one trace row, stopping decision.
    """
    from ..policy import HISTORY_WINDOW, EnvHandle, PromptContext, Role, decide

    budget = params.T_max if step_budget is None else step_budget
    if budget < 1:
        raise ValueError("mapping budget must be >= 1")
    if budget > params.T_max:
        raise ValueError(f"mapping budget {budget} exceeds T_max={params.T_max}")
    params = params.with_budget(budget)
    opening = opening or env.last_observation
    visits = {opening.canonical_key: 1}
    extractor = make_extractor(instruction)
    cmap = CognitiveMap(instruction.env_id, tuple(extractor.initial(opening)), f"{instruction.task_id}/map")
    handle = EnvHandle(env, {"visits": visits, "extractor": extractor})
    trace = ConvergenceTrace()
    steps: list[StepRecord] = []
    terminal = False
    while True:
        ctx = PromptContext(Role.SCOUT.value, instruction, knowledge, cmap, tuple(steps[-HISTORY_WINDOW:]))
        d = decide(ctx, backend, handle)
        obs, done, _ = env.step(d.action)
        visits[obs.canonical_key] = visits.get(obs.canonical_key, 0) + 1
        before = cmap.entry_count
        cmap = cmap.merged(extractor.feed(d.action.text, obs))
        steps.append(StepRecord(d.action, obs, "task_map", d.thought, d.tokens_in, d.tokens_out))
        trace = trace.appended(cmap.entry_count - before, visits[obs.canonical_key], params)
        if trace.rows[-1].decision != StopDecision.CONTINUE.value:
            break
        if done:
            terminal = True
            break
    traj = Trajectory(f"{instruction.task_id}/map", instruction, tuple(steps), opening)
    final = build_map(traj, instruction, backend)
    return Stage2Result(final, traj, trace, terminal)
