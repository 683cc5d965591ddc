"""Exact observation parsers that turn exploration steps into map entries.

Each extractor is incremental: ``initial`` consumes the reset observation and
``feed`` one (action, observation) pair, returning only entries it has not
emitted before. ``build_map`` replays a whole trajectory through one.
"""

from __future__ import annotations

import copy
import re
from typing import Optional

import numpy as np

from ..core import CognitiveMap, Instruction, KnowledgeEntry, Observation, Trajectory
from ..envs.config import load_env_config
from ..envs.craft import TABLE, parse_recipe_text
from ..envs.grid import ACTIONS, DIR_NAMES, WALKABLE_COLORS, layout_facts
from ..envs.house import obj_class


def parse_house_instruction(text: str) -> dict:
    for name, spec in load_env_config("house")["templates"].items():
        rx = re.escape(spec["text"]).replace(r"\{cls\}", "(?P<cls>.+?)").replace(r"\{dest\}", "(?P<dest>.+)")
        m = re.fullmatch(rx, text)
        if m:
            return {"template": name, "cls": m.group("cls"), "dest": m.group("dest"), "needs": spec["needs"], "count": spec["count"]}
    raise ValueError(f"unrecognised house instruction {text!r}")


def parse_craft_instruction(text: str) -> str:
    m = re.fullmatch(r"craft 1 (.+)", text)
    if not m:
        raise ValueError(f"unrecognised craft instruction {text!r}")
    return m.group(1)


def parse_list(text: str) -> list[str]:
    if text == "nothing":
        return []
    out = []
    for part in text.split(", "):
        part = part.removeprefix("and ")
        out.append(part.removeprefix("a "))
    return out


class Extractor:
    env_id = ""

    def __init__(self, instruction: Instruction):
        self.instruction = instruction
        self.emitted: set = set()
        self._pending: list[KnowledgeEntry] = []
        self._step = 0

    def clone(self) -> "Extractor":
        return copy.deepcopy(self)

    def _emit(self, kind: str, subject: str, relation: str, obj: str, confidence: str = "observed") -> None:
        e = KnowledgeEntry(kind, subject, relation, obj, self._step, confidence)
        if e.key not in self.emitted:
            self.emitted.add(e.key)
            self._pending.append(e)

    def _flush(self) -> list[KnowledgeEntry]:
        out, self._pending = self._pending, []
        return out

    def initial(self, obs: Observation) -> list[KnowledgeEntry]:
        self._step = obs.step_index
        self._parse_initial(obs)
        return self._flush()

    def feed(self, action: str, obs: Observation) -> list[KnowledgeEntry]:
        self._step = obs.step_index
        self._parse_step(action, obs)
        return self._flush()

    def _parse_initial(self, obs: Observation) -> None:
        self._parse_step("", obs)

    def _parse_step(self, action: str, obs: Observation) -> None:
        raise NotImplementedError


class HouseExtractor(Extractor):
    env_id = "house"

    _ARRIVE = re.compile(r"You (?:arrive at|are at) (.+?)\.(?: (.*))?")
    _INITIAL = re.compile(r"You are in the middle of room\. Looking quickly around you, you see (.+)\.")
    _OPENED = re.compile(r"You open the (.+?)\. (.*)")
    _PUT = re.compile(r"You put the (.+) in/on the (.+)\.")
    _TOOK = re.compile(r"You pick up the (.+) from the (.+)\.")
    _TREAT = re.compile(r"You (heat|cool|clean) the (.+) using the (.+)\.")
    _LAMP = re.compile(r"You turn on the (.+)\.")
    _STATE = {"heat": "hot", "cool": "cool", "clean": "clean"}
    _VERB = {"heat": "heats objects", "cool": "cools objects", "clean": "cleans objects"}

    def __init__(self, instruction: Instruction):
        super().__init__(instruction)
        self.task = parse_house_instruction(instruction.text)
        self.classes: set[str] = {self.task["cls"]}
        self.contents: dict[str, set] = {}

    def _see_contents(self, loc: str, items: list[str]) -> None:
        self.contents[loc] = set(items)
        for o in items:
            self._emit("spatial", o, "at", loc)
            self._emit("affordance", o, "take", "can be picked up", "inferred")
            c = obj_class(o)
            if c not in self.classes:
                self.classes.add(c)
        self._negatives()

    def _negatives(self) -> None:
        for loc in sorted(self.contents):
            here = {obj_class(o) for o in self.contents[loc]}
            for c in sorted(self.classes - here):
                self._emit("negative", c, "not_in", loc)

    def _describe(self, loc: str, body: str) -> None:
        for sentence in re.split(r"(?<=\.) ", body) if body else []:
            m = re.fullmatch(r"The (.+) is closed\.", sentence)
            if m:
                self._emit("affordance", loc, "open", "reveals contents")
                continue
            m = re.fullmatch(r"The (.+) is open\.", sentence)
            if m:
                self._emit("affordance", loc, "open", "reveals contents")
                continue
            m = re.fullmatch(r"(?:In it|On the .+), you see (.+)\.", sentence)
            if m:
                self._see_contents(loc, parse_list(m.group(1)))
                continue
            m = re.fullmatch(r"You can (heat|cool|clean) things here\.", sentence)
            if m:
                self._emit("affordance", loc, m.group(1), self._VERB[m.group(1)])
                continue
            if re.fullmatch(r"You can use the (.+) here\.", sentence):
                self._emit("affordance", loc, "use", "turns on the light")

    def _parse_step(self, action: str, obs: Observation) -> None:
        text = obs.text
        if obs.error_flag:
            return
        m = self._INITIAL.fullmatch(text)
        if m:
            for loc in parse_list(m.group(1)):
                self._emit("spatial", loc, "reachable", "true")
            return
        m = self._OPENED.fullmatch(text)
        if m:
            self._describe(m.group(1), m.group(2))
            return
        m = self._ARRIVE.fullmatch(text)
        if m:
            self._emit("spatial", m.group(1), "reachable", "true")
            self._describe(m.group(1), m.group(2) or "")
            return
        m = self._TOOK.fullmatch(text)
        if m:
            self.contents.get(m.group(2), set()).discard(m.group(1))
            return
        m = self._PUT.fullmatch(text)
        if m:
            obj, loc = m.groups()
            if loc in self.contents:
                self._see_contents(loc, sorted(self.contents[loc] | {obj}))
            else:
                self._emit("spatial", obj, "at", loc)
            return
        m = self._TREAT.fullmatch(text)
        if m:
            verb, obj, loc = m.groups()
            self._emit("affordance", obj, "state", self._STATE[verb])
            self._emit("affordance", loc, verb, self._VERB[verb])
            return
        m = self._LAMP.fullmatch(text)
        if m:
            self._emit("affordance", m.group(1), "use", "turns on the light")


class CraftExtractor(Extractor):
    env_id = "craft"

    _START = re.compile(r"You are at crafting table 1\. From here you can go to: (.+)\.")
    _AT = re.compile(r"You (?:arrive at|are at) (.+?)\.(?: (.*))?")
    _RECIPES = re.compile(r"Crafting recipes: (.+)\.")

    def __init__(self, instruction: Instruction):
        super().__init__(instruction)
        self.target = parse_craft_instruction(instruction.text)
        self.raws: set[str] = set()
        self.contents: dict[str, set] = {}
        self.recipes: dict[str, tuple] = {}

    def _negatives(self) -> None:
        for node in sorted(self.contents):
            for r in sorted(self.raws - self.contents[node]):
                self._emit("negative", r, "not_in", node)

    def _parse_step(self, action: str, obs: Observation) -> None:
        if obs.error_flag:
            return
        text = obs.text
        m = self._START.fullmatch(text)
        if m:
            self._emit("spatial", TABLE, "reachable", "true")
            for node in m.group(1).split(", "):
                self._emit("spatial", node, "reachable", "true")
            return
        m = self._RECIPES.fullmatch(text)
        if m:
            self._emit("affordance", TABLE, "examine", "lists crafting recipes")
            for part in m.group(1).split("; "):
                item, rec = parse_recipe_text(part)
                self.recipes[item] = rec
                y, ings = rec
                self._emit("affordance", item, "craft", f"{y} from " + ", ".join(f"{n} {i}" for n, i in ings))
            for item, (_, ings) in sorted(self.recipes.items()):
                for _, ing in ings:
                    if ing not in self.recipes:
                        self.raws.add(ing)
            self._negatives()
            return
        m = self._AT.fullmatch(text)
        if m:
            loc, body = m.group(1), m.group(2) or ""
            self._emit("spatial", loc, "reachable", "true")
            if loc == TABLE:
                return
            here: list[str] = []
            mm = re.fullmatch(r"Here you can get: (.+)\.", body)
            if mm:
                here = mm.group(1).split(", ")
            self.contents[loc] = set(here)
            for r in here:
                self.raws.add(r)
                self._emit("spatial", r, "at", loc)
                self._emit("affordance", r, "get", "raw material")
            self._negatives()
            return
        m = re.fullmatch(r"Got (\d+) (.+)\.", text)
        if m:
            self._emit("affordance", m.group(2), "get", "raw material")


def decode_frame(text: str):
    """Header fields and the colour array of a grid observation."""
    lines = text.split("\n")
    parts = lines[0].split()
    head = {"level": int(parts[1]), "state": parts[3], "event": parts[5]}
    raw = np.frombuffer("".join(lines[1:]).encode("ascii"), dtype=np.uint8).astype(np.int16)
    vals = raw - 48
    vals[vals > 9] -= 39
    n = len(lines) - 1
    return head, vals.reshape(n, -1).astype(np.uint8)


def frame_tracks(g: np.ndarray) -> list[list[tuple[int, int]]]:
    """Maximal straight runs of track or hazard cells."""
    on = np.isin(g, (3, 8))
    seen = set()
    tracks = []
    H, W = g.shape
    for r, c in zip(*np.nonzero(on)):
        r, c = int(r), int(c)
        if (r, c) in seen:
            continue
        horiz = (c + 1 < W and on[r, c + 1]) or (c > 0 and on[r, c - 1])
        dr, dc = (0, 1) if horiz else (1, 0)
        run = []
        rr, cc = r, c
        while 0 <= rr < H and 0 <= cc < W and on[rr, cc]:
            run.append((rr, cc))
            rr, cc = rr + dr, cc + dc
        seen.update(run)
        tracks.append(run)
    return sorted(tracks)


def frame_layout(g: np.ndarray):
    """Walkable mask (counter row excluded), player, target, hazard cells, counter."""
    body = g[:-1]
    walk = np.zeros_like(g, dtype=np.uint8)
    walk[:-1] = np.isin(body, list(WALKABLE_COLORS))
    player = tuple(int(x) for x in np.argwhere(body == 9)[0]) if (body == 9).any() else None
    target = tuple(int(x) for x in np.argwhere(body == 14)[0]) if (body == 14).any() else None
    hazards = sorted((int(r), int(c)) for r, c in np.argwhere(body == 8))
    counter = int((g[-1] == 6).sum())
    return walk, player, target, hazards, counter


class GridExtractor(Extractor):
    env_id = "grid"

    def __init__(self, instruction: Instruction):
        super().__init__(instruction)
        self.prev = None  # (player, counter, hazards, level)
        self.lastdir = None
        self.tracks: list = []
        self.hz_dir: dict[int, int] = {}
        self.hz_idx: dict[int, int] = {}

    def clone(self) -> "GridExtractor":
        # tracks and prev are replaced, never mutated, so only the containers need copies
        ex = copy.copy(self)
        ex.emitted, ex._pending = set(self.emitted), list(self._pending)
        ex.hz_dir, ex.hz_idx = dict(self.hz_dir), dict(self.hz_idx)
        return ex

    def _level_start(self, g) -> None:
        walk, player, target, hazards, counter = frame_layout(g)
        self.tracks = frame_tracks(g)
        for f in layout_facts(walk, target, self.tracks):
            self._emit(f.kind, f.subject, f.relation, f.object)
        self.lastdir = None
        self.hz_dir, self.hz_idx = {}, {}
        self._note_hazards(hazards)

    def _note_hazards(self, hazards) -> None:
        for i, t in enumerate(self.tracks):
            idx = next((t.index(h) for h in hazards if h in t), None)
            if idx is None:
                continue
            if i in self.hz_idx:
                step = idx - self.hz_idx[i]
                if abs(step) == 1:
                    self._emit("rule", "hazard", "moves", "one cell per successful move")
                    if i in self.hz_dir and self.hz_dir[i] == -step:
                        self._emit("rule", "hazard", "bounces", "at track ends")
                    self.hz_dir[i] = step
            self.hz_idx[i] = idx

    def _parse_initial(self, obs: Observation) -> None:
        head, g = decode_frame(obs.text)
        self._level_start(g)
        _, player, _, hazards, counter = frame_layout(g)
        self.prev = (player, counter, hazards, head["level"])

    def _parse_step(self, action: str, obs: Observation) -> None:
        head, g = decode_frame(obs.text)
        _, player, _, hazards, counter = frame_layout(g)
        ev = head["event"]
        outcome = {"dead": ("hazard contact", "causes", "game over"), "exhausted": ("counter exhaustion", "causes", "game over"), "level_complete": ("target", "completes", "level")}
        if ev in outcome:
            self._emit("rule", *outcome[ev])
        if self.prev is None or ev in ("restart", "level_complete") or head["level"] != self.prev[3]:
            if ev != "level_complete" or head["state"] == "playing":
                self._level_start(g)
            self.prev = (player, counter, hazards, head["level"])
            return
        p_player, p_counter, _, _ = self.prev
        spent = p_counter - counter
        unit = "counter pixel" if spent == 1 else "counter pixels"
        if ev == "blocked":
            self._emit("rule", "blocked move", "consumes", f"{spent} {unit}")
        elif ev in ("moved", "dead", "exhausted") and player is not None and p_player is not None and player != p_player:
            d = (player[0] - p_player[0], player[1] - p_player[1])
            k = {(-1, 0): 0, (1, 0): 1, (0, -1): 2, (0, 1): 3}.get(d)
            if k is not None and action in ACTIONS:
                self._emit("affordance", action, "moves", DIR_NAMES[k])
                if ev == "moved":
                    kind = "move" if self.lastdir in (None, k) else "turn"
                    self._emit("rule", kind, "consumes", f"{spent} {unit}")
                self.lastdir = k
            if ev == "moved":
                self._note_hazards(hazards)
        self.prev = (player, counter, hazards, head["level"])


EXTRACTORS = {"house": HouseExtractor, "craft": CraftExtractor, "grid": GridExtractor}


def make_extractor(instruction: Instruction) -> Extractor:
    return EXTRACTORS[instruction.env_id](instruction)


def build_map(exploration: Trajectory, instruction: Optional[Instruction] = None, backend=None) -> CognitiveMap:
    """Cognitive map of a finished exploration.

    The exact parser runs over the initial observation and every step. With a
    remote backend the extractor prompt is sent as well and its reply is
    merged in (see ``mapact.policy.remote.extract_entries``).
    """
    instruction = instruction or exploration.instruction
    ex = make_extractor(instruction)
    entries: list[KnowledgeEntry] = []
    if exploration.initial_observation is not None:
        entries += ex.initial(exploration.initial_observation)
    for rec in exploration.steps:
        entries += ex.feed(rec.action.text, rec.observation)
    if backend is not None and getattr(backend, "kind", "oracle") == "remote":
        from ..policy.remote import extract_entries

        entries += extract_entries(backend, exploration, instruction)
    return CognitiveMap(instruction.env_id, tuple(entries), exploration.traj_id)


def replay_extractor(instruction: Instruction, initial: Optional[Observation], steps) -> Extractor:
    ex = make_extractor(instruction)
    if initial is not None:
        ex.initial(initial)
    for rec in steps:
        ex.feed(rec.action.text, rec.observation)
    return ex
