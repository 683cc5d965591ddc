"""Scripted oracle backend.

Every role except the distiller and the extractor has a deterministic
implementation here. Those two are covered by :func:`mapact.mapping.distill_global`
and :func:`mapact.mapping.build_map`, which run without a model.
"""

from __future__ import annotations

from collections import deque

from ..core import Action, CognitiveMap
from ..envs.craft import TABLE, recipe_command
from ..envs.grid import ACTIONS
from .actors import make_actor
from .context import EnvHandle, PolicyDecision, PolicyError, PromptContext, Role
from .scout import oracle_explore_step

FOCUS_POINTS = {
    "house": (
        ("Failed commands all return the same short message.", "Try a natural but unlisted phrasing for picking something up and note the reply."),
        ("Objects are always named together with a location.", "Check whether taking an object requires standing at the location that holds it."),
        ("Only one object ever appears in the inventory.", "Test whether a second object can be taken while one is already held."),
        ("Some receptacles are reported as closed.", "Test whether closed receptacles accept or release objects before they are opened."),
    ),
    "craft": (
        ("Recipes are listed in a fixed sentence pattern.", "Check whether a shortened craft command is accepted or only the full recipe form."),
        ("Crafting consumes ingredients.", "Try crafting before holding the ingredients and note the reply."),
        ("Raw materials are listed per node.", "Try gathering a raw material away from the node that lists it."),
    ),
    "grid": (
        ("Actions are unlabelled.", "Press every action once from the start cell and record which way the player moves."),
        ("Walls surround the corridors.", "Walk into a wall and compare the counter row before and after."),
        ("Hazard cells change between frames.", "Track hazard positions across several moves to learn their pattern."),
    ),
}

REFLECTOR_HINTS = {
    ("house", "unrecognized"): "use the form 'take {obj} from {loc}' while standing at the location",
    ("house", "holding"): "put down the held item first",
    ("house", "closed"): "open the container first",
    ("house", "elsewhere"): "go to the location that holds the object first",
    ("craft", "unrecognized"): "use the full form 'craft {n} {item} using {ingredients}'",
    ("craft", "ingredients"): "gather the ingredients first",
    ("craft", "node"): "go to the node that lists the raw material",
    ("craft", "table"): "go to the crafting table first",
    ("grid", "blocked"): "that way is a wall; try another action",
    ("grid", "unrecognized"): "only ACTION1 to ACTION4 and look are accepted",
}


def focus_points(env_id: str, manual_steps=()) -> list[tuple[str, str]]:
    """(reasoning, focus point) pairs: a fixed list plus one per command form in the manual steps."""
    from ..envs import env_class

    cls = env_class(env_id)
    pairs = list(FOCUS_POINTS[env_id])
    seen = []
    for rec in manual_steps:
        tpl = cls.action_template(rec.action.text)
        if tpl not in seen and tpl != "<unrecognized>":
            seen.append(tpl)
    for tpl in seen:
        pairs.append((f"The examples use the command form '{tpl}'.", f"Confirm that '{tpl}' is accepted exactly as written."))
    return pairs


def format_focus_points(pairs) -> str:
    lines = []
    for i, (reason, point) in enumerate(pairs, 1):
        lines += [f"Reasoning {i}: {reason}", f"Focus Point {i}: {point}"]
    return "\n".join(lines)


def failure_cause(env, action: str) -> str:
    """Classify why ``action`` would fail in the current state of ``env``."""
    env_id = env.env_id
    tpl = env.action_template(action)
    if tpl == "<unrecognized>":
        return "unrecognized"
    if env_id == "house":
        if tpl == "take {obj} from {loc}":
            obj, loc = action[5:].split(" from ", 1)
            if env.inventory is not None:
                return "holding"
            if loc in env.closed:
                return "closed"
            return "elsewhere"
        if tpl == "put {obj} in/on {loc}":
            loc = action.split(" in/on ", 1)[1]
            if loc in env.closed:
                return "closed"
        return "elsewhere"
    if env_id == "craft":
        if tpl.startswith("craft"):
            return "table" if env.position != TABLE else "ingredients"
        if tpl.startswith("get"):
            return "node"
        return "node"
    return "blocked"


def reflect(env, action: str) -> str:
    cause = failure_cause(env, action)
    return REFLECTOR_HINTS.get((env.env_id, cause), "check the admissible commands")


# ---------------------------------------------------------------------------
# Stage-1 explorer


def _house_script(env) -> list[tuple[str, str]]:
    out = []
    objs = sorted(env.placement)
    if not objs:
        return out
    o1 = objs[0]
    l1 = env.placement[o1]
    out.append((f"pick up {o1}", "probe the command form for picking things up"))
    out.append((f"go to {l1}", f"walk to the {o1}"))
    if l1 in env.closed:
        out.append((f"take {o1} from {l1}", "probe taking from a closed receptacle"))
        out.append((f"open {l1}", "retry after opening"))
    out.append((f"take {o1} from {l1}", f"take the {o1}"))
    rest = [o for o in objs if o != o1]
    if not rest:
        return out
    o2 = next((o for o in rest if env.placement[o] != l1), rest[0])
    l2 = env.placement[o2]
    if l2 != l1:
        out.append((f"go to {l2}", f"walk to the {o2}"))
        if l2 in env.closed:
            out.append((f"open {l2}", f"open the {l2}"))
    out.append((f"take {o2} from {l2}", "probe holding two objects"))
    out.append((f"put {o1} in/on {l2}", "put the first object down"))
    out.append((f"take {o2} from {l2}", "retry with empty hands"))
    closed = sorted(l for l in env.closed if l not in (l1, l2))
    if closed:
        c = closed[0]
        out.append((f"go to {c}", f"walk to the closed {c}"))
        out.append((f"put {o2} in/on {c}", "probe placing into a closed receptacle"))
        out.append((f"open {c}", "retry after opening"))
        out.append((f"put {o2} in/on {c}", "place the object"))
    else:
        out.append((f"put {o2} in/on {l2}", "put the object back"))
    return out


def _craft_script(env) -> list[tuple[str, str]]:
    out = [(f"craft 1 {env.target}", "probe a short craft command"), (f"examine {TABLE}", "read the recipes")]
    out.append((recipe_command(env.target, env.recipes[env.target]), "probe crafting without ingredients"))
    raws = sorted(r for r in env.raw_at if r in {i for _, (_, ings) in env.recipes.items() for _, i in ings})
    if raws:
        r = raws[0]
        home = env.raw_at[r]
        other = next((n for n in env.nodes if n != home), None)
        if other is not None:
            out.append((f"go to {other}", "visit a node that does not list the material"))
            out.append((f"get 1 {r}", "probe gathering away from its node"))
        out.append((f"go to {home}", "go to the node that lists it"))
        out.append((f"get 1 {r}", "gather one unit"))
    return out


def _grid_script(env) -> list[tuple[str, str]]:
    return [(a, f"press {a} to see what it does") for a in ACTIONS]


SCRIPTS = {"house": _house_script, "craft": _craft_script, "grid": _grid_script}


def _explorer_step(ctx: PromptContext, handle: EnvHandle) -> PolicyDecision:
    env = handle.env
    tables = handle.tables
    if "script" not in tables:
        tables["script"] = deque(SCRIPTS[env.env_id](env))
    last = ctx.history[-1] if ctx.history else None
    hint = None
    if last is not None and last.observation.error_flag:
        hint = tables.get("hint")
    script = tables["script"]
    if script:
        text, why = script.popleft()
        thought = why if hint is None else f"{why} ({hint})"
        return PolicyDecision(Action(text, env.action_kind(text)), thought, role=Role.EXPLORER.value)
    if "solver" not in tables:
        gt = env.ground_truth()
        cmap = CognitiveMap(env.env_id, gt.facts, "ground-truth")
        tables["solver"] = make_actor(ctx.instruction, "map", env.last_observation, cmap)
    actor = tables["solver"]
    actor.observe(ctx.history)
    text = actor.act(env.perception())
    return PolicyDecision(Action(text, env.action_kind(text)), actor.thought, role=Role.EXPLORER.value)


# ---------------------------------------------------------------------------
# dispatcher

_EXECUTOR_MODES = {
    Role.EXECUTOR_MAP.value: "map",
    Role.EXECUTOR_COMAP.value: "comap",
    Role.EXECUTOR_REACT.value: "react",
}


def executor_step(ctx: PromptContext, handle: EnvHandle) -> PolicyDecision:
    env = handle.env
    actor = handle.tables.get("actor")
    if actor is None:
        raise PolicyError("executor oracle needs an actor in the episode tables")
    actor.observe(ctx.history)
    text = actor.act(env.perception())
    return PolicyDecision(Action(text, env.action_kind(text)), actor.thought, role=ctx.role_template)


def oracle_decide(ctx: PromptContext, handle) -> PolicyDecision:
    role = ctx.role_template
    if role in (Role.DISTILLER.value, Role.EXTRACTOR.value):
        raise PolicyError(f"the oracle backend has no {role} policy; use the deterministic builder instead")
    if role == Role.FOCUS_ANALYZER.value:
        text = format_focus_points(focus_points(ctx.env_id, ctx.history))
        return PolicyDecision(Action("think", "noop"), text, role=role)
    if handle is None or getattr(handle, "env", None) is None:
        raise PolicyError(f"oracle {role} needs an environment handle")
    if role == Role.SCOUT.value:
        t = handle.tables
        return oracle_explore_step(handle.env, t["visits"], t["extractor"])
    if role == Role.REFLECTOR.value:
        if not ctx.history:
            raise PolicyError("reflector needs the failed step in the history")
        hint = reflect(handle.env, ctx.history[-1].action.text)
        handle.tables["hint"] = hint
        return PolicyDecision(Action("think", "noop"), hint, role=role)
    if role == Role.EXPLORER.value:
        return _explorer_step(ctx, handle)
    if role in _EXECUTOR_MODES:
        return executor_step(ctx, handle)
    raise PolicyError(f"oracle cannot play role {role}")


__all__ = ["oracle_decide", "focus_points", "format_focus_points", "reflect", "failure_cause"]
