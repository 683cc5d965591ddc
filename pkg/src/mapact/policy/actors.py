"""Scripted executors for the map, comap and react paradigms.

The three modes share one planner per environment and differ only in what
they know:

* ``map``: the cognitive map handed over by Stage 2, plus own observations.
* ``comap``: own observations, kept for the whole episode.
* ``react``: own observations, forgotten whenever a new subgoal starts. In the
  grid it also never builds a hazard model and dodges conservatively.

Besides observations an actor reads only the perception summary of the
environment (position, inventory, open flags, admissible commands); hidden
state such as object placement is never consulted.
"""

from __future__ import annotations

import re
from collections import deque
from typing import Optional

import numpy as np

from .. import _kernels
from ..core import CognitiveMap, Instruction, Observation
from ..envs.craft import TABLE, expand, parse_recipe_text, recipe_command
from ..envs.grid import ACTIONS, DIR_NAMES, cell_name
from ..envs.house import obj_class
from ..mapping.extract import (
    CraftExtractor,
    GridExtractor,
    HouseExtractor,
    decode_frame,
    frame_layout,
    frame_tracks,
    parse_list,
)

MODES = ("map", "comap", "react")


class Actor:
    env_id = ""

    def __init__(self, instruction: Instruction, mode: str, opening: Observation, cmap: Optional[CognitiveMap] = None):
        if mode not in MODES:
            raise ValueError(f"unknown actor mode {mode!r}")
        if mode != "map" and cmap is not None:
            raise ValueError(f"{mode} actors take no prebuilt map")
        self.instruction = instruction
        self.mode = mode
        self.cmap = cmap
        self.opening = opening
        self.last_step = opening.step_index
        self.subgoal = None
        self.thought = ""

    def observe(self, history) -> None:
        for rec in history:
            if rec.observation.step_index > self.last_step:
                self.last_step = rec.observation.step_index
                self._update(rec.action.text, rec.observation)

    def _update(self, action: str, obs: Observation) -> None:
        raise NotImplementedError

    def act(self, perception: dict) -> str:
        raise NotImplementedError

    def _set_subgoal(self, goal) -> bool:
        """Record the current subgoal; True when it just changed."""
        changed = goal != self.subgoal
        self.subgoal = goal
        if changed and self.mode == "react":
            self._forget()
        return changed

    def _forget(self) -> None:
        pass


# ---------------------------------------------------------------------------
# household


class HouseActor(Actor):
    env_id = "house"
    _LOCS = HouseExtractor._INITIAL

    def __init__(self, instruction, mode, opening, cmap=None):
        super().__init__(instruction, mode, opening, cmap)
        self.ex = HouseExtractor(instruction)
        self.task = self.ex.task
        self.locations: list[str] = []
        m = self._LOCS.fullmatch(opening.text)
        if m:
            self.locations = parse_list(m.group(1))
        self.stations: dict[str, str] = {}
        self.inspected: set[str] = set()
        self.treated: set[str] = set()
        self.lamp_on = False
        if cmap is not None:
            self._seed(cmap)
        self._update("", opening)

    def _seed(self, cmap: CognitiveMap) -> None:
        for e in cmap.entries:
            if e.kind == "spatial" and e.relation == "reachable" and e.subject not in self.locations:
                self.locations.append(e.subject)
            elif e.kind == "spatial" and e.relation == "at" and e.object != "inventory":
                self.ex.contents.setdefault(e.object, set()).add(e.subject)
            elif e.kind == "negative":
                self.ex.contents.setdefault(e.object, set())
            elif e.kind == "affordance" and e.relation in ("heat", "cool", "clean"):
                self.stations[e.relation] = e.subject
        self.locations.sort()
        self.inspected = set(self.ex.contents)

    def _forget(self) -> None:
        self.ex = HouseExtractor(self.instruction)
        self.stations = {}
        self.inspected = set()

    def _update(self, action: str, obs: Observation) -> None:
        before = {k: set(v) for k, v in self.ex.contents.items()}
        new = self.ex.feed(action, obs)
        for e in new:
            if e.kind == "affordance" and e.relation in ("heat", "cool", "clean"):
                self.stations[e.relation] = e.subject
        text = obs.text
        if obs.error_flag:
            tpl = action.split(" ", 1)[0]
            if tpl == "take" and " from " in action:
                obj, loc = action[5:].split(" from ", 1)
                self.ex.contents.get(loc, set()).discard(obj)
                # what we believed is stale: search everything again
                self.inspected = {loc}
            return
        m = HouseExtractor._ARRIVE.fullmatch(text)
        if m:
            loc, body = m.group(1), m.group(2) or ""
            if "is closed" not in body:
                self.inspected.add(loc)
        m = HouseExtractor._OPENED.fullmatch(text)
        if m:
            self.inspected.add(m.group(1))
        m = HouseExtractor._TREAT.fullmatch(text)
        if m:
            self.treated.add(m.group(2))
        if text.startswith("You turn on the "):
            self.lamp_on = True
        cls = self.task["cls"]
        for loc, objs in self.ex.contents.items():
            if loc in before and before[loc] != objs:
                self.inspected.add(loc)
                gone = {o for o in before[loc] - objs if obj_class(o) == cls}
                if gone and action != f"take {min(gone)} from {loc}":
                    # an object we counted on has moved: search everything again
                    self.inspected = {loc}

    # planning --------------------------------------------------------------
    def _is_open(self, perception, loc) -> bool:
        return perception["open"].get(loc, True)

    def _goto_then(self, perception, loc, action: str) -> str:
        if perception["position"] != loc:
            return f"go to {loc}"
        if not self._is_open(perception, loc):
            return f"open {loc}"
        return action

    def _search(self, perception, exclude=()) -> str:
        here = perception["position"]
        pending = [l for l in self.locations if l not in self.inspected and l not in exclude]
        if not pending:
            self.inspected = set()
            pending = [l for l in self.locations if l not in exclude and l != here] or [l for l in self.locations if l not in exclude]
        target = here if here in pending else pending[0]
        if target == here:
            return f"open {here}" if not self._is_open(perception, here) else "look"
        return f"go to {target}"

    def act(self, perception: dict) -> str:
        here = perception["position"]
        known = set(self.locations) | {a[6:] for a in perception["admissible"] if a.startswith("go to ")}
        if here in self.ex.contents or here in perception["open"]:
            known.add(here)
        self.locations = sorted(known)
        cls, dest, needs = self.task["cls"], self.task["dest"], self.task["needs"]
        held = perception["inventory"][0] if perception["inventory"] else None
        if held is not None and obj_class(held) == cls:
            if needs in ("heat", "cool", "clean") and held not in self.treated:
                self._set_subgoal(("treat", held))
                station = self.stations.get(needs)
                if station is None:
                    self.thought = f"looking for somewhere to {needs} the {held}"
                    return self._search(perception)
                self.thought = f"{needs} the {held} at {station}"
                if here != station:
                    return f"go to {station}"
                return f"{needs} {held} with {station}"
            if needs == "light":
                self._set_subgoal(("lamp", held))
                lamp = next((l for l in self.locations if obj_class(l) == dest), None)
                self.thought = f"switch on the {dest}"
                if lamp is None:
                    return self._search(perception)
                return f"go to {lamp}" if here != lamp else f"use {lamp}"
            self._set_subgoal(("place", held))
            self.thought = f"bring the {held} to {dest}"
            return self._goto_then(perception, dest, f"put {held} in/on {dest}")
        if held is not None:
            self._set_subgoal(("drop", held))
            self.thought = f"put the {held} down"
            if here in self.locations and self._is_open(perception, here):
                return f"put {held} in/on {here}"
            return self._search(perception)
        if needs == "light" and obj_class(here) == dest and not self.lamp_on:
            # already standing at the lamp: switching it on first saves a walk back
            self.thought = f"switch on the {dest} while here"
            return f"use {here}"
        self._set_subgoal(("fetch",))
        cands = []
        untreated_ok = needs in ("heat", "cool", "clean")
        station = self.stations.get(needs) if untreated_ok else None
        for loc, objs in self.ex.contents.items():
            for o in objs:
                if loc == dest and not (untreated_ok and o not in self.treated):
                    continue
                if obj_class(o) == cls:
                    cost = (0 if loc == here else 1) + (0 if self._is_open(perception, loc) else 1)
                    if station is not None and o not in self.treated:
                        cost += 0 if loc == station else 1
                    cands.append((cost, loc, o))
        if cands:
            _, loc, obj = min(cands)
            self.thought = f"the {obj} should be at {loc}"
            return self._goto_then(perception, loc, f"take {obj} from {loc}")
        self.thought = f"searching for a {cls}"
        return self._search(perception, exclude=(dest,))


# ---------------------------------------------------------------------------
# crafting


class CraftActor(Actor):
    env_id = "craft"

    def __init__(self, instruction, mode, opening, cmap=None):
        super().__init__(instruction, mode, opening, cmap)
        self.ex = CraftExtractor(instruction)
        self.target = self.ex.target
        self.recipes: dict[str, tuple] = {}
        self.raw_node: dict[str, str] = {}
        self.nodes: list[str] = []
        self.inspected: set[str] = set()
        self.crafted: set[str] = set()
        if cmap is not None:
            self._seed(cmap)
        self._update("", opening)

    def _seed(self, cmap: CognitiveMap) -> None:
        for e in cmap.entries:
            if e.kind == "spatial" and e.relation == "reachable" and e.subject != TABLE and e.subject not in self.nodes:
                self.nodes.append(e.subject)
            elif e.kind == "spatial" and e.relation == "at":
                self.raw_node[e.subject] = e.object
                self.inspected.add(e.object)
            elif e.kind == "negative":
                self.inspected.add(e.object)
            elif e.kind == "affordance" and e.relation == "craft":
                self.recipes[e.subject] = parse_recipe_text(f"{e.object.split(' ', 1)[0]} {e.subject} from {e.object.split(' from ', 1)[1]}")[1]
        self.nodes.sort()

    def _forget(self) -> None:
        self.raw_node = {}
        self.inspected = set()

    def _update(self, action: str, obs: Observation) -> None:
        if obs.error_flag:
            m = action.split(" ")
            if m[0] == "get" and len(m) >= 3:
                raw = action.split(" ", 2)[2]
                if self.raw_node.get(raw) is not None:
                    # stale location: forget it and search again
                    self.raw_node.pop(raw, None)
                    self.inspected = set()
            return
        text = obs.text
        m = CraftExtractor._START.fullmatch(text)
        if m:
            for n in m.group(1).split(", "):
                if n not in self.nodes:
                    self.nodes.append(n)
            self.nodes.sort()
            return
        m = CraftExtractor._RECIPES.fullmatch(text)
        if m:
            for part in m.group(1).split("; "):
                item, rec = parse_recipe_text(part)
                self.recipes[item] = rec
            return
        m = CraftExtractor._AT.fullmatch(text)
        if m:
            loc, body = m.group(1), m.group(2) or ""
            if loc == TABLE:
                return
            self.inspected.add(loc)
            for r, n in list(self.raw_node.items()):
                if n == loc:
                    del self.raw_node[r]
            if body.startswith("Here you can get: "):
                for r in body[len("Here you can get: ") : -1].split(", "):
                    self.raw_node[r] = loc
            return
        m = re.fullmatch(r"Crafted (\d+) (.+)\.", text)
        if m:
            self.crafted.add(m.group(2))

    def _remaining(self) -> list[str]:
        """Items still to craft, bottom-up."""
        _, order = expand(self.recipes, self.target)
        return [i for i in order if i not in self.crafted]

    def _raw_needs(self, items, inventory: dict) -> dict[str, int]:
        need: dict[str, int] = {}
        for item in items:
            for n, ing in self.recipes[item][1]:
                if ing not in self.recipes:
                    need[ing] = need.get(ing, 0) + n
        return {r: n - inventory.get(r, 0) for r, n in sorted(need.items()) if n > inventory.get(r, 0)}

    def act(self, perception: dict) -> str:
        here, inv = perception["position"], perception["inventory"]
        gone = {a[6:] for a in perception["admissible"] if a.startswith("go to ")} - {TABLE}
        if here != TABLE:
            gone.add(here)
        self.nodes = sorted(set(self.nodes) | gone)
        if self.target not in self.recipes:
            self._set_subgoal(("recipes",))
            self.thought = "read the recipe book"
            return "go to crafting table 1" if here != TABLE else "examine crafting table 1"
        todo = self._remaining()
        item = todo[0]
        self._set_subgoal(("craft", item))
        scope = [item] if self.mode == "react" else todo
        need = self._raw_needs(scope, inv)
        if not need:
            self.thought = f"craft {item}"
            if here != TABLE:
                return "go to crafting table 1"
            return recipe_command(item, self.recipes[item])
        known = {r: self.raw_node[r] for r in need if r in self.raw_node}
        if known:
            at_here = sorted(r for r, n in known.items() if n == here)
            if at_here:
                r = at_here[0]
                self.thought = f"gather {r}"
                return f"get {need[r]} {r}"
            node = min(known.values())
            self.thought = f"go to {node} for {', '.join(sorted(r for r, n in known.items() if n == node))}"
            return f"go to {node}"
        self.thought = f"searching for {', '.join(need)}"
        pending = [n for n in self.nodes if n not in self.inspected]
        if not pending:
            self.inspected = set()
            pending = [n for n in self.nodes if n != here] or self.nodes
        target = pending[0]
        return f"go to {target}" if target != here else "look"


# ---------------------------------------------------------------------------
# grid


def _neighbors(walk, cell):
    H, W = walk.shape
    for d in range(4):
        r, c = cell[0] + _kernels.DR[d], cell[1] + _kernels.DC[d]
        if 0 <= r < H and 0 <= c < W and walk[r, c]:
            yield d, (r, c)


def bfs_dirs(walk, start, goal, avoid=frozenset()):
    """Shortest direction list from start to goal over walkable cells, or None."""
    prev = {start: None}
    q = deque([start])
    while q:
        cur = q.popleft()
        if cur == goal:
            break
        for d, nxt in _neighbors(walk, cur):
            if nxt not in prev and nxt not in avoid:
                prev[nxt] = (cur, d)
                q.append(nxt)
    if goal not in prev:
        return None
    dirs = []
    cur = goal
    while prev[cur] is not None:
        cur, d = prev[cur]
        dirs.append(d)
    return dirs[::-1]


class GridActor(Actor):
    env_id = "grid"

    def __init__(self, instruction, mode, opening, cmap=None):
        super().__init__(instruction, mode, opening, cmap)
        self.ex = GridExtractor(instruction)
        self.known: dict[str, int] = {}
        self.turn_cost: Optional[int] = None
        self.hazard_model = False
        if cmap is not None:
            self._absorb(cmap.entries)
        self.level = None
        self.phase = 0
        self.lastdir = _kernels.NO_DIR
        self.prev_cell = None
        self._frame(opening)
        self.ex.initial(opening)

    def _absorb(self, entries) -> None:
        for e in entries:
            if e.kind == "affordance" and e.relation == "moves" and e.subject in ACTIONS:
                self.known[e.subject] = DIR_NAMES.index(e.object)
            elif e.kind == "rule" and e.subject == "turn" and e.relation == "consumes":
                self.turn_cost = int(e.object.split()[0])
            elif e.kind == "rule" and e.subject == "hazard" and e.relation == "moves" and self.mode != "react":
                self.hazard_model = True

    def _forget(self) -> None:
        self.known = {}

    def _frame(self, obs: Observation) -> None:
        head, g = decode_frame(obs.text)
        walk, player, target, hazards, counter = frame_layout(g)
        if head["level"] != self.level or head["event"] == "restart":
            self.level = head["level"]
            self.phase = 0
            self.lastdir = _kernels.NO_DIR
            self.prev_cell = None
            self.tracks = frame_tracks(g)
            self.walk = walk
            self._set_subgoal(("level", self.level))
        self.target = target
        self.player, self.hazards, self.counter, self.state = player, hazards, counter, head["state"]

    def _update(self, action: str, obs: Observation) -> None:
        old_player, old_level = self.player, self.level
        self._absorb(self.ex.feed(action, obs))
        head, _ = decode_frame(obs.text)
        self._frame(obs)
        if self.level == old_level and head["event"] in ("moved", "dead", "exhausted") and self.player != old_player:
            d = (self.player[0] - old_player[0], self.player[1] - old_player[1])
            k = {(-1, 0): 0, (1, 0): 1, (0, -1): 2, (0, 1): 3}[d]
            self.known[action] = k
            self.phase += 1
            self.lastdir = k
            self.prev_cell = old_player

    # planning --------------------------------------------------------------
    def _hazard_arrays(self):
        if not self.tracks:
            return np.zeros((0, 1, 2), np.int32), np.zeros(0, np.int32), 1
        L = max(len(t) for t in self.tracks)
        cells = np.zeros((len(self.tracks), L, 2), np.int32)
        period = 1
        for i, t in enumerate(self.tracks):
            cells[i, : len(t)] = t
            period = int(np.lcm(period, 2 * (len(t) - 1)))
        return cells, np.array([len(t) for t in self.tracks], np.int32), period

    def _unsafe(self, cell) -> bool:
        return any(abs(cell[0] - h[0]) + abs(cell[1] - h[1]) <= 1 for h in self.hazards)

    def _planned_dirs(self):
        if self.hazard_model:
            cells, lens, period = self._hazard_arrays()
            args = (self.walk, *self.player, *self.target, cells, lens, period)
            # fewest moves first; the counter-cheapest route only when that one overdraws
            for tc in (1, self.turn_cost or 2):
                cost, dirs = _kernels.plan_grid(*args, tc, 64, self.phase % period, self.lastdir)
                if cost >= 0 and dirs and self._spend(dirs) <= self.counter:
                    return list(dirs), True
        return bfs_dirs(self.walk, self.player, self.target), False

    def _spend(self, dirs) -> int:
        tc, last, total = self.turn_cost or 2, self.lastdir, 0
        for d in dirs:
            total += 1 if last in (_kernels.NO_DIR, d) else tc
            last = d
        return total

    def _action_for(self, d: int) -> Optional[str]:
        return next((a for a in ACTIONS if self.known.get(a) == d), None)

    def act(self, perception: dict) -> str:
        admissible = set(perception["admissible"])
        dirs, exact = self._planned_dirs()
        if not dirs:
            self.thought = "no route to the target"
            return "look"
        d = dirs[0]
        nxt = (self.player[0] + _kernels.DR[d], self.player[1] + _kernels.DC[d])
        if not exact and self._unsafe(nxt):
            dodge = self._dodge(admissible)
            if dodge is not None:
                self.thought = "hazard ahead, stepping aside"
                return dodge
        a = self._action_for(d)
        if a is not None:
            self.thought = f"move {DIR_NAMES[d]} toward {cell_name(self.target)}"
            return a
        unknown = [x for x in ACTIONS if x not in self.known and x in admissible]
        if unknown:
            self.thought = f"find out what {unknown[0]} does"
            return unknown[0]
        self.thought = "no usable move"
        return "look"

    def _dodge(self, admissible) -> Optional[str]:
        options = []
        for a, d in sorted(self.known.items()):
            if a not in admissible:
                continue
            cell = (self.player[0] + _kernels.DR[d], self.player[1] + _kernels.DC[d])
            if not self._unsafe(cell):
                options.append((cell != self.prev_cell, a))
        return min(options)[1] if options else None


ACTORS = {"house": HouseActor, "craft": CraftActor, "grid": GridActor}


def make_actor(instruction: Instruction, mode: str, opening: Observation, cmap: Optional[CognitiveMap] = None) -> Actor:
    return ACTORS[instruction.env_id](instruction, mode, opening, cmap)
