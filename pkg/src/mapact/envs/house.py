"""Household text world: receptacles, portable objects, appliance stations."""

from __future__ import annotations

import re
from typing import Callable, Optional

from .base import Env, EnvError, fact
from .config import load_env_config

START = "middle of room"
FAILURE = "Nothing happens."

_STATION_VERB = {"heat": "heats objects", "cool": "cools objects", "clean": "cleans objects"}
_FLAG = {"heat": "hot", "cool": "cool", "clean": "clean"}

_RE = [
    ("go to {loc}", re.compile(r"go to (.+)")),
    ("open {loc}", re.compile(r"open (.+)")),
    ("close {loc}", re.compile(r"close (.+)")),
    ("take {obj} from {loc}", re.compile(r"take (.+) from (.+)")),
    ("put {obj} in/on {loc}", re.compile(r"put (.+) in/on (.+)")),
    ("heat {obj} with {loc}", re.compile(r"heat (.+) with (.+)")),
    ("cool {obj} with {loc}", re.compile(r"cool (.+) with (.+)")),
    ("clean {obj} with {loc}", re.compile(r"clean (.+) with (.+)")),
    ("use {loc}", re.compile(r"use (.+)")),
    ("look", re.compile(r"look")),
    ("inventory", re.compile(r"inventory")),
]
UNRECOGNIZED = "<unrecognized>"


def obj_class(name: str) -> str:
    return name.rsplit(" ", 1)[0]


def list_items(items) -> str:
    items = [f"a {i}" for i in sorted(items)]
    if not items:
        return "nothing"
    if len(items) == 1:
        return items[0]
    return ", ".join(items[:-1]) + ", and " + items[-1]


class HouseEnv(Env):
    env_id = "house"
    templates = tuple(load_env_config("house")["templates"])

    def __init__(self, seed: int, template: str, config: Optional[dict] = None):
        self.cfg = config or load_env_config("house")
        super().__init__(seed, template)

    # generation ------------------------------------------------------------
    def _generate(self, rng) -> None:
        cfg = self.cfg
        tmpl = cfg["templates"][self.template]
        needs = tmpl["needs"]
        kinds = {name: spec["kind"] for name, spec in cfg["locations"].items()}
        stations = {name: spec.get("station") for name, spec in cfg["locations"].items()}
        names = sorted(kinds)
        chosen: list[str] = []
        station_loc = None
        if needs:
            station_loc = next(n for n in names if stations[n] == needs)
            chosen.append(station_loc)
        classes = sorted(c for c, caps in cfg["objects"].items() if needs is None or needs in caps)
        cls = rng.choice(classes)
        if needs == "light":
            dest = station_loc
        else:
            dest = rng.choice([n for n in names if kinds[n] != "fixture" and stations[n] is None])
            chosen.append(dest)
        lo, hi = cfg["generation"]["n_locations"]
        n = rng.randint(lo, hi)
        pool = [x for x in names if x not in chosen and kinds[x] != "fixture"]
        rng.shuffle(pool)
        max_closed = cfg["generation"]["max_closed"]
        for cand in pool:
            if len(chosen) >= n:
                break
            n_closed = sum(kinds[c] == "container" for c in chosen)
            if kinds[cand] == "container" and n_closed >= max_closed:
                continue
            chosen.append(cand)
        self.locations = {f"{c} 1": {"kind": kinds[c], "station": stations[c]} for c in sorted(chosen)}
        self.dest = f"{dest} 1"
        self.station = None if station_loc is None else f"{station_loc} 1"
        self.target_cls = cls
        self.count = tmpl["count"]
        holding = [l for l, s in self.locations.items() if s["kind"] != "fixture"]
        sources = [l for l in holding if l != self.dest]
        counters: dict[str, int] = {}
        self.placement: dict[str, str] = {}

        def add(c: str, where: str) -> None:
            counters[c] = counters.get(c, 0) + 1
            self.placement[f"{c} {counters[c]}"] = where

        for _ in range(self.count + rng.randint(0, 1)):
            add(cls, rng.choice(sources))
        lo, hi = cfg["generation"]["n_distractors"]
        others = sorted(c for c in cfg["objects"] if c != cls)
        for _ in range(rng.randint(lo, hi)):
            add(rng.choice(others), rng.choice(holding))
        self.closed = {l for l, s in self.locations.items() if s["kind"] == "container"}
        self.flags: dict[str, set] = {o: set() for o in self.placement}
        self.position = START
        self.inventory: Optional[str] = None
        self.lamp_on = False

    def _solvable(self) -> bool:
        targets = [o for o in self.placement if obj_class(o) == self.target_cls and self.placement[o] != self.dest]
        if len(targets) < self.count:
            return False
        if self.cfg["templates"][self.template]["needs"] and self.station is None:
            return False
        return True

    def _instruction_text(self) -> str:
        tmpl = self.cfg["templates"][self.template]["text"]
        dest = self.dest.rsplit(" ", 1)[0] if self.template == "examine_light" else self.dest
        return tmpl.format(cls=self.target_cls, dest=dest)

    def _initial_text(self) -> str:
        return f"You are in the {START}. Looking quickly around you, you see {list_items(self.locations)}."

    # helpers ---------------------------------------------------------------
    def caps(self, obj: str) -> list[str]:
        return self.cfg["objects"][obj_class(obj)]

    def contents(self, loc: str) -> list[str]:
        return sorted(o for o, where in self.placement.items() if where == loc)

    def accessible(self, loc: str) -> bool:
        spec = self.locations[loc]
        return spec["kind"] == "surface" or (spec["kind"] == "container" and loc not in self.closed)

    def describe(self, loc: str) -> str:
        spec = self.locations[loc]
        parts = []
        if spec["kind"] == "container":
            if loc in self.closed:
                parts.append(f"The {loc} is closed.")
            else:
                parts.append(f"The {loc} is open. In it, you see {list_items(self.contents(loc))}.")
        elif spec["kind"] == "surface":
            parts.append(f"On the {loc}, you see {list_items(self.contents(loc))}.")
        st = spec["station"]
        if st == "light":
            parts.append(f"You can use the {loc} here.")
        elif st:
            parts.append(f"You can {st} things here.")
        return " ".join(parts)

    def _goal_met(self) -> bool:
        if self.template == "examine_light":
            return self.lamp_on and self.inventory is not None and obj_class(self.inventory) == self.target_cls
        need = self.cfg["templates"][self.template]["needs"]
        flag = _FLAG.get(need) if need else None
        placed = [
            o
            for o, where in self.placement.items()
            if where == self.dest and obj_class(o) == self.target_cls and (flag is None or flag in self.flags[o])
        ]
        return len(placed) >= self.count

    def _resolve(self, text: str) -> Optional[tuple[str, Callable[[], None]]]:
        tpl, m = self.match(text)
        if m is None:
            return None
        g = m.groups()
        here = self.position
        if tpl == "look":
            if here == START:
                return self._initial_text(), lambda: None
            return " ".join(p for p in (f"You are at {here}.", self.describe(here)) if p), lambda: None
        if tpl == "inventory":
            if self.inventory is None:
                return "You are not carrying anything.", lambda: None
            return f"You are carrying: a {self.inventory}.", lambda: None
        if tpl == "go to {loc}":
            loc = g[0]
            if loc not in self.locations or loc == here:
                return None

            def go():
                self.position = loc

            return " ".join(p for p in (f"You arrive at {loc}.", self.describe(loc)) if p), go
        if tpl in ("open {loc}", "close {loc}"):
            loc = g[0]
            if loc != here or self.locations[loc]["kind"] != "container":
                return None
            if tpl == "open {loc}":
                if loc not in self.closed:
                    return None
                return (
                    f"You open the {loc}. The {loc} is open. In it, you see {list_items(self.contents(loc))}.",
                    lambda: self.closed.discard(loc),
                )
            if loc in self.closed:
                return None
            return f"You close the {loc}.", lambda: self.closed.add(loc)
        if tpl == "take {obj} from {loc}":
            obj, loc = g
            if loc != here or self.inventory is not None or self.placement.get(obj) != loc or not self.accessible(loc):
                return None

            def take():
                self.placement[obj] = "inventory"
                self.inventory = obj

            return f"You pick up the {obj} from the {loc}.", take
        if tpl == "put {obj} in/on {loc}":
            obj, loc = g
            if self.inventory != obj or loc != here or loc not in self.locations:
                return None
            if self.locations[loc]["kind"] == "fixture" or not self.accessible(loc):
                return None

            def put():
                self.placement[obj] = loc
                self.inventory = None

            return f"You put the {obj} in/on the {loc}.", put
        if tpl in ("heat {obj} with {loc}", "cool {obj} with {loc}", "clean {obj} with {loc}"):
            verb = tpl.split()[0]
            obj, loc = g
            if self.inventory != obj or loc != here or self.locations.get(loc, {}).get("station") != verb:
                return None
            if verb not in self.caps(obj):
                return None

            def change():
                flags = self.flags[obj]
                flags.add(_FLAG[verb])
                if verb == "heat":
                    flags.discard("cool")
                elif verb == "cool":
                    flags.discard("hot")

            return f"You {verb} the {obj} using the {loc}.", change
        if tpl == "use {loc}":
            loc = g[0]
            if loc != here or self.locations[loc]["station"] != "light":
                return None

            def use():
                self.lamp_on = True

            return f"You turn on the {loc}.", use
        return None

    @classmethod
    def match(cls, text: str):
        for tpl, rx in _RE:
            m = rx.fullmatch(text)
            if m:
                return tpl, m
        return UNRECOGNIZED, None

    @classmethod
    def action_template(cls, text: str) -> str:
        return cls.match(" ".join(text.split()))[0]

    @classmethod
    def action_kind(cls, text: str) -> str:
        tpl = cls.action_template(text)
        if tpl == "go to {loc}":
            return "navigate"
        if tpl in ("look", "inventory"):
            return "observe"
        if tpl == UNRECOGNIZED:
            return "noop"
        return "interact"

    # engine ----------------------------------------------------------------
    def _apply(self, text: str) -> tuple[str, bool]:
        r = self._resolve(text)
        if r is None:
            return FAILURE, True
        out, effect = r
        effect()
        if self._goal_met():
            self.success = True
            self.done = True
        return out, False

    def _candidates(self) -> list[str]:
        out = ["look", "inventory"]
        for loc in self.locations:
            out += [f"go to {loc}", f"open {loc}", f"close {loc}", f"use {loc}"]
            for o in self.placement:
                out.append(f"take {o} from {loc}")
            if self.inventory:
                o = self.inventory
                out += [f"put {o} in/on {loc}", f"heat {o} with {loc}", f"cool {o} with {loc}", f"clean {o} with {loc}"]
        return out

    def _admissible(self) -> list[str]:
        return [c for c in self._candidates() if self._resolve(c) is not None]

    def _relocate(self, obj: str, dest: str) -> None:
        if obj not in self.placement:
            raise EnvError(f"no object {obj!r}")
        if dest not in self.locations or self.locations[dest]["kind"] == "fixture":
            raise EnvError(f"no holding location {dest!r}")
        if self.placement[obj] == dest:
            raise EnvError(f"{obj} is already at {dest}")
        if self.inventory == obj:
            self.inventory = None
        self.placement[obj] = dest

    def holding_locations(self) -> list[str]:
        return sorted(l for l, s in self.locations.items() if s["kind"] != "fixture")

    def _explored_set(self, explored) -> list[str]:
        hold = self.holding_locations()
        return hold if explored is None else [l for l in explored if l in hold]

    def _facts(self, explored) -> list:
        out = []
        for loc, spec in self.locations.items():
            out.append(fact("spatial", loc, "reachable", "true"))
            if spec["kind"] == "container":
                out.append(fact("affordance", loc, "open", "reveals contents"))
            st = spec["station"]
            if st == "light":
                out.append(fact("affordance", loc, "use", "turns on the light"))
            elif st:
                out.append(fact("affordance", loc, st, _STATION_VERB[st]))
        for o, where in self.placement.items():
            out.append(fact("spatial", o, "at", where))
            out.append(fact("affordance", o, "take", "can be picked up"))
            for fl in sorted(self.flags[o]):
                out.append(fact("affordance", o, "state", fl))
        classes = sorted({obj_class(o) for o in self.placement})
        for loc in self._explored_set(explored):
            here = {obj_class(o) for o in self.contents(loc)}
            for c in classes:
                if c not in here:
                    out.append(fact("negative", c, "not_in", loc))
        return out

    def _state(self) -> dict:
        return {
            "position": self.position,
            "inventory": self.inventory,
            "placement": dict(sorted(self.placement.items())),
            "closed": sorted(self.closed),
            "flags": {o: sorted(f) for o, f in sorted(self.flags.items())},
            "locations": {l: dict(s) for l, s in sorted(self.locations.items())},
            "lamp_on": self.lamp_on,
        }

    def _task_info(self) -> dict:
        return {
            "template": self.template,
            "target_class": self.target_cls,
            "dest": self.dest,
            "station": self.station,
            "count": self.count,
        }

    def perception(self) -> dict:
        return {
            "position": self.position,
            "inventory": [] if self.inventory is None else [self.inventory],
            "open": {l: l not in self.closed for l, s in self.locations.items() if s["kind"] == "container"},
            "admissible": [a.text for a in self.admissible_actions()],
        }

    def state_key(self):
        return (
            self.position,
            self.inventory,
            tuple(sorted(self.placement.items())),
            frozenset(self.closed),
            tuple(sorted((o, frozenset(f)) for o, f in self.flags.items())),
            self.lamp_on,
            self.success,
        )
