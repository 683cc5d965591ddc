"""Deterministic stand-in for the Stage-2 scout.

Frontier first: among exploratory commands that reveal at least one new map
entry, take the one whose resulting observation has the lowest visit count,
then the most new entries, then the smallest command text. The result of a
command is found by stepping a clone of the environment. Once no command
reveals anything new, a short breadth-first search over clones looks for a
command sequence that still teaches something; when that fails too the scout
stays put and issues ``look``.
"""

from __future__ import annotations

from collections import deque

from ..core import Action
from ..envs.grid import ACTIONS
from .context import PolicyDecision, Role

# lookahead depth of the fallback search
SEARCH_DEPTH = {"house": 3, "craft": 3, "grid": 8}
_FAILED_EVENTS = ("dead", "exhausted", "level_complete")


def _candidates(env) -> list[str]:
    if env.env_id == "grid":
        return list(ACTIONS)
    keep = ("go to {loc}", "open {loc}", "examine {loc}")
    return [a.text for a in env.admissible_actions() if env.action_template(a.text) in keep]


def _ends_episode(env) -> bool:
    return env.done or env.success or (env.env_id == "grid" and env.event in _FAILED_EVENTS)


def _probe(env, extractor, action: str):
    sim = env.clone()
    obs, _, _ = sim.step(action)
    if _ends_episode(sim):
        return None
    ex = extractor.clone()
    return sim, ex, obs, ex.feed(action, obs)


def _search_key(env):
    if env.env_id == "grid":
        return (env.player, env.lastdir, env.phase % env.level.period)
    return env.state_key()


def _search_ahead(env, extractor):
    """First command of the shortest safe sequence that ends by revealing an entry."""
    seen = {_search_key(env)}
    frontier = deque([(env, extractor, None, 0)])
    limit = SEARCH_DEPTH[env.env_id]
    while frontier:
        cur, ex, first, depth = frontier.popleft()
        if depth >= limit:
            continue
        for a in _candidates(cur):
            r = _probe(cur, ex, a)
            if r is None:
                continue
            sim, ex2, _, new = r
            head = first or a
            if new:
                return head
            key = _search_key(sim)
            if key not in seen:
                seen.add(key)
                frontier.append((sim, ex2, head, depth + 1))
    return None


def oracle_explore_step(env, visits: dict, extractor) -> PolicyDecision:
    """One scout decision from the live env, the visit table and the map built so far."""
    best = None
    for a in _candidates(env):
        r = _probe(env, extractor, a)
        if r is None:
            continue
        _, _, obs, new = r
        if not new:
            continue
        cand = (visits.get(obs.canonical_key, 0), -len(new), a, new)
        if best is None or cand[:3] < best[:3]:
            best = cand
    if best is not None:
        _, _, a, new = best
        return PolicyDecision(Action(a, env.action_kind(a)), f"{len(new)} new entries expected", tuple(new), role=Role.SCOUT.value)
    a = _search_ahead(env, extractor)
    if a is not None:
        return PolicyDecision(Action(a, env.action_kind(a)), "moving toward something unexplored", role=Role.SCOUT.value)
    return PolicyDecision(Action("look", "observe"), "nothing new within reach", role=Role.SCOUT.value)
