"""Stage 3 execution plus the react and comap baseline loops.

``run_pipeline`` ties the stages together for one seed: it builds the world,
runs Stage 2 when the paradigm needs a map, then acts. Budgets default to
the per-family table below; react and comap receive the mapping and acting
budgets of the map configuration as one total budget.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

from .core import CognitiveMap, EpisodeReport, GlobalKnowledge, Instruction, Observation, StepRecord, Trajectory
from .envs import FAMILIES, dump_replay, make, template_for
from .mapping.extract import make_extractor
from .mapping.stage2 import run_stage2
from .mapping.stopping import ConvergenceTrace, StoppingParams
from .policy import HISTORY_WINDOW, EnvHandle, PromptContext, Role, decide, make_actor

log = logging.getLogger(__name__)

PARADIGMS = ("map", "react", "comap")
MAP_COMPONENTS = ("spatial", "affordance")
# negatives are claims about where objects are, so they go with the spatial kind
_DROPPED_KINDS = {"spatial": ("spatial", "negative"), "affordance": ("affordance",)}

# (mapping, acting) steps per task family
DEFAULT_BUDGETS = {"house": (10, 50), "science": (15, 50), "craft": (15, 50), "grid": (30, 100)}


def default_params(family: str) -> StoppingParams:
    """Stopping parameters whose cap admits the family's mapping budget."""
    mapping, _ = DEFAULT_BUDGETS[family]
    return StoppingParams(T_max=max(15, mapping))


@dataclass(frozen=True)
class ExecutorConfig:
    paradigm: str = "map"
    acting_budget: int = 50
    ablate_stage1: bool = False
    ablate_stage2: bool = False
    drop_map_component: Optional[str] = None

    def __post_init__(self):
        if self.paradigm not in PARADIGMS:
            raise ValueError(f"unknown paradigm {self.paradigm!r}")
        if self.acting_budget < 0:
            raise ValueError("acting_budget must be >= 0")
        if self.drop_map_component is not None and self.drop_map_component not in MAP_COMPONENTS:
            raise ValueError(f"drop_map_component must be one of {MAP_COMPONENTS}")
        if self.paradigm != "map" and (self.ablate_stage1 or self.ablate_stage2 or self.drop_map_component):
            raise ValueError("ablations only apply to the map paradigm")
        if self.ablate_stage2 and self.drop_map_component:
            raise ValueError("drop_map_component needs a map; it cannot combine with ablate_stage2")

    @property
    def omitted(self) -> frozenset:
        out = set()
        if self.ablate_stage1:
            out.add("knowledge")
        if self.ablate_stage2:
            out.add("map")
        return frozenset(out)


# perturbation hook: (acting step before which it fires, builder from the live env)
Perturbation = tuple[int, Callable]


def filter_map(cmap: CognitiveMap, component: Optional[str]) -> CognitiveMap:
    return cmap if component is None else cmap.without_kinds(*_DROPPED_KINDS[component])


def episode_success(env) -> bool:
    return bool(env.success)


def _max_level(env) -> Optional[int]:
    return env.levels_completed if env.env_id == "grid" else None


def detect_reexploration(traj: Trajectory, t_perturb: int, stale_location=None) -> bool:
    """True iff a step at or after ``t_perturb`` navigates somewhere other than the stale location.

    ``stale_location`` may be a name or a collection of names. When omitted it
    is the destination of the last navigate step before the perturbation.
    Grid moves have no destination names; there the alternative location is
    the relocated target, so a level completed after the perturbation counts.
    """
    steps = traj.steps
    if not 0 <= t_perturb <= len(steps):
        raise ValueError(f"t_perturb={t_perturb} outside a {len(steps)}-step trajectory")
    if any(s.action.kind == "grid_action" for s in steps):
        return any(s.observation.text.split("\n", 1)[0].endswith("EVENT level_complete") for s in steps[t_perturb:])
    if stale_location is None:
        prior = [s.action.text for s in steps[:t_perturb] if s.action.kind == "navigate"]
        stale = {prior[-1][len("go to "):]} if prior else set()
    elif isinstance(stale_location, str):
        stale = {stale_location}
    else:
        stale = set(stale_location)
    for s in steps[t_perturb:]:
        if s.action.kind == "navigate" and s.action.text.startswith("go to "):
            if s.action.text[len("go to "):] not in stale:
                return True
    return False


def _act_loop(instruction, env, role, knowledge, cmap, actor, budget, backend, perturbation=None, grow=None, omit=frozenset()):
    """Shared decide/step loop. Returns (steps, t_perturb, final map)."""
    handle = EnvHandle(env, {"actor": actor})
    steps: list[StepRecord] = []
    t_perturb = None
    while len(steps) < budget and not env.done:
        if perturbation is not None and t_perturb is None and len(steps) == perturbation[0]:
            spec = perturbation[1](env)
            if spec is not None:
                env.apply_perturbation(spec)
                t_perturb = len(steps)
        history = tuple(steps[-HISTORY_WINDOW:])
        ctx = PromptContext(role, instruction, knowledge, cmap, history, omit=omit)
        d = decide(ctx, backend, handle)
        obs, _, _ = env.step(d.action)
        steps.append(StepRecord(d.action, obs, "act", d.thought, d.tokens_in, d.tokens_out))
        if grow is not None:
            cmap = grow(cmap, d.action.text, obs)
    return steps, t_perturb, cmap


def run_episode(
    instruction: Instruction,
    env,
    knowledge: Optional[GlobalKnowledge],
    cmap: Optional[CognitiveMap],
    backend=None,
    config: ExecutorConfig = ExecutorConfig(),
    perturbation: Optional[Perturbation] = None,
    mapping: Optional[Trajectory] = None,
) -> tuple[Trajectory, EpisodeReport]:
    """Act in ``env`` from its current state; map or react paradigm.

    ``mapping`` is the Stage-2 trajectory when one ran; its step and token
    counts go into the report. A perturbation builder returns
    ``(PerturbationSpec, [(obj, dest, original location), ...])`` or None.
    """
    if config.paradigm == "comap":
        raise ValueError("comap episodes run through run_comap_episode")
    if config.paradigm == "react":
        if knowledge is not None or cmap is not None:
            raise ValueError("react takes neither global knowledge nor a map")
        role, actor_mode, shown_k, shown_m = Role.EXECUTOR_REACT.value, "react", None, None
    else:
        if knowledge is None and not config.ablate_stage1:
            raise ValueError("map paradigm needs global knowledge unless Stage 1 is ablated")
        if cmap is None and not config.ablate_stage2:
            raise ValueError("map paradigm needs a cognitive map unless Stage 2 is ablated")
        role = Role.EXECUTOR_MAP.value
        shown_k = None if config.ablate_stage1 else knowledge
        shown_m = None if config.ablate_stage2 else filter_map(cmap, config.drop_map_component)
        actor_mode = "comap" if config.ablate_stage2 else "map"
    if env.env_id == "grid" and env.step_counter and not env.done:
        # acting starts from a fresh level: the scout's moves spent counter
        opening = env.restart_level()
    else:
        opening = env.last_observation
    actor = make_actor(instruction, actor_mode, opening, shown_m if actor_mode == "map" else None)
    holder: dict = {}
    steps, t_perturb, _ = _act_loop(
        instruction, env, role, shown_k, shown_m, actor, config.acting_budget, backend, _wrap(perturbation, holder), omit=config.omitted
    )
    traj = Trajectory(f"{instruction.task_id}/{config.paradigm}", instruction, tuple(steps), opening, episode_success(env))
    reexplored = None
    if t_perturb is not None:
        reexplored = detect_reexploration(traj, t_perturb, holder.get("stale"))
    map_steps = len(mapping) if mapping is not None else 0
    tok_map = mapping.tokens() if mapping is not None else 0
    tok_act = traj.tokens()
    report = EpisodeReport(
        instruction,
        episode_success(env),
        map_steps,
        len(steps),
        tok_map + tok_act,
        len(steps),
        t_perturb,
        reexplored,
        config.paradigm,
        tok_map,
        tok_act,
        _max_level(env),
        _notes(config),
    )
    return traj, report


def _wrap(perturbation: Optional[Perturbation], holder: dict):
    """Adapt a builder returning (spec, moves) to the loop, keeping the stale locations in ``holder``."""
    if perturbation is None:
        return None
    at, build = perturbation

    def fire(env):
        built = build(env)
        if built is None:
            return None
        spec, moves = built
        holder["stale"] = {src for _, _, src in moves}
        return spec

    return (at, fire)


def _notes(config: ExecutorConfig) -> tuple[str, ...]:
    notes = []
    if config.ablate_stage1:
        notes.append("ablate_stage1")
    if config.ablate_stage2:
        notes.append("ablate_stage2")
    if config.drop_map_component:
        notes.append(f"drop_{config.drop_map_component}")
    return tuple(notes)


def run_comap_episode(
    instruction: Instruction,
    env,
    backend=None,
    budget: int = 65,
    perturbation: Optional[Perturbation] = None,
) -> tuple[Trajectory, CognitiveMap, EpisodeReport]:
    """Single interleaved loop; the map grows from every observation and is shown at every step."""
    opening = env.last_observation
    extractor = make_extractor(instruction)
    cmap = CognitiveMap(instruction.env_id, tuple(extractor.initial(opening)), f"{instruction.task_id}/comap")

    def grow(m, action, obs):
        return m.merged(extractor.feed(action, obs))

    actor = make_actor(instruction, "comap", opening)
    holder: dict = {}
    steps, t_perturb, cmap = _act_loop(
        instruction, env, Role.EXECUTOR_COMAP.value, None, cmap, actor, budget, backend, _wrap(perturbation, holder), grow
    )
    traj = Trajectory(f"{instruction.task_id}/comap", instruction, tuple(steps), opening, episode_success(env) if steps else False)
    reexplored = None
    if t_perturb is not None:
        reexplored = detect_reexploration(traj, t_perturb, holder.get("stale"))
    tok = traj.tokens()
    report = EpisodeReport(
        instruction,
        episode_success(env) if steps else False,
        0,
        len(steps),
        tok,
        len(steps),
        t_perturb,
        reexplored,
        "comap",
        0,
        tok,
        _max_level(env),
        ("empty budget",) if budget == 0 else (),
    )
    return traj, cmap, report


@dataclass
class EpisodeResult:
    """Everything one seed produced."""

    report: EpisodeReport
    acting: Trajectory
    mapping: Optional[Trajectory] = None
    cognitive_map: Optional[CognitiveMap] = None
    trace: Optional[ConvergenceTrace] = None
    mapping_terminal: bool = False
    template: str = ""
    # event log of the environment, re-executable with mapact.envs.replay
    replay: str = ""
    family: str = ""


def run_pipeline(
    family: str,
    seed: int,
    paradigm: str = "map",
    knowledge: Optional[GlobalKnowledge] = None,
    backend=None,
    budgets: Optional[tuple[int, int]] = None,
    params: Optional[StoppingParams] = None,
    ablate_stage1: bool = False,
    ablate_stage2: bool = False,
    drop_map_component: Optional[str] = None,
    perturbation: Optional[Perturbation] = None,
    templates=None,
) -> EpisodeResult:
    """Build the world for ``seed`` and run one episode of ``paradigm``."""
    if family not in FAMILIES:
        raise ValueError(f"unknown task family {family!r}")
    env_id = FAMILIES[family][0]
    template = template_for(family, seed, templates)
    mapping_budget, acting_budget = budgets or DEFAULT_BUDGETS[family]
    params = params or default_params(family)
    env = make(env_id, seed, template)
    instruction, _ = env.reset()
    if paradigm == "comap":
        traj, cmap, report = run_comap_episode(instruction, env, backend, mapping_budget + acting_budget, perturbation)
        return EpisodeResult(report, traj, None, cmap, None, False, template, dump_replay(env), family)
    if paradigm == "react":
        cfg = ExecutorConfig("react", mapping_budget + acting_budget)
        traj, report = run_episode(instruction, env, None, None, backend, cfg, perturbation)
        return EpisodeResult(report, traj, template=template, replay=dump_replay(env), family=family)
    cfg = ExecutorConfig("map", acting_budget, ablate_stage1, ablate_stage2, drop_map_component)
    mapping = cmap = trace = None
    terminal = False
    if not ablate_stage2:
        res = run_stage2(instruction, env, knowledge, backend, params, mapping_budget)
        cmap, mapping, trace, terminal = res.cognitive_map, res.trajectory, res.trace, res.terminal
    if terminal:
        log.warning("%s: environment ended during mapping; acting skipped", instruction.task_id)
        traj = Trajectory(f"{instruction.task_id}/map", instruction, (), env.last_observation, False)
        report = EpisodeReport(
            instruction, False, len(mapping), 0, mapping.tokens(), 0, paradigm="map",
            tokens_map=mapping.tokens(), max_level=_max_level(env), notes=("ended during mapping",),
        )
        return EpisodeResult(report, traj, mapping, cmap, trace, True, template, dump_replay(env), family)
    traj, report = run_episode(instruction, env, knowledge, cmap, backend, cfg, perturbation, mapping)
    return EpisodeResult(report, traj, mapping, cmap, trace, terminal, template, dump_replay(env), family)
