"""Crafting world: resource nodes, a crafting table and a generated recipe book."""

from __future__ import annotations

import re
from typing import Optional

from .base import Env, EnvError, fact
from .config import load_env_config

TABLE = "crafting table 1"

_RE = [
    ("go to {loc}", re.compile(r"go to (.+)")),
    ("get {n} {raw}", re.compile(r"get ([1-9]) (.+)")),
    ("craft {n} {item} using {ingredients}", re.compile(r"craft (\d+) (.+?) using (.+)")),
    ("examine {loc}", re.compile(r"examine (.+)")),
    ("look", re.compile(r"look")),
    ("inventory", re.compile(r"inventory")),
]
UNRECOGNIZED = "<unrecognized>"


def recipe_command(item: str, recipe) -> str:
    y, ings = recipe
    return f"craft {y} {item} using " + ", ".join(f"{n} {i}" for n, i in ings)


def recipe_effect(recipe) -> str:
    y, ings = recipe
    return f"{y} from " + ", ".join(f"{n} {i}" for n, i in ings)


def recipe_text(item: str, recipe) -> str:
    y, _ = recipe
    return f"{y} {item} from " + recipe_effect(recipe).split(" from ", 1)[1]


def parse_recipe_text(text: str):
    head, _, tail = text.partition(" from ")
    y, item = head.split(" ", 1)
    ings = []
    for part in tail.split(", "):
        n, ing = part.split(" ", 1)
        ings.append((int(n), ing))
    return item, (int(y), tuple(ings))


def expand(recipes: dict, target: str):
    """Raw totals and bottom-up craft order for one unit of ``target``.

    Every recipe on the path is crafted once; the generator keeps intermediate
    demands within one batch.
    """
    raws: dict[str, int] = {}
    order: list[str] = []

    def visit(item: str, count: int) -> None:
        if item not in recipes:
            raws[item] = raws.get(item, 0) + count
            return
        for n, ing in recipes[item][1]:
            visit(ing, n)
        if item not in order:
            order.append(item)

    visit(target, 1)
    return raws, order


def recipe_depth(recipes: dict, item: str) -> int:
    if item not in recipes:
        return 0
    return 1 + max(recipe_depth(recipes, ing) for _, ing in recipes[item][1])


class CraftEnv(Env):
    env_id = "craft"
    templates = tuple(load_env_config("craft")["templates"])

    def __init__(self, seed: int, template: str, config: Optional[dict] = None):
        self.cfg = config or load_env_config("craft")
        super().__init__(seed, template)

    def _generate(self, rng) -> None:
        cfg, gen = self.cfg, self.cfg["generation"]
        nodes = sorted(rng.sample(cfg["nodes"], rng.randint(*gen["n_nodes"])))
        self.nodes = [f"{n} 1" for n in nodes]
        raws = rng.sample(cfg["raws"], rng.randint(*gen["n_raws"]))
        self.raw_at = {}
        for i, r in enumerate(raws):
            self.raw_at[r] = self.nodes[i] if i < len(self.nodes) else rng.choice(self.nodes)
        items = list(cfg["items"])
        rng.shuffle(items)
        mc, my = gen["max_count"], gen["max_yield"]

        def raw_ings(k: int):
            return tuple(sorted(((rng.randint(1, mc), r) for r in rng.sample(sorted(raws), k)), key=lambda p: p[1]))

        self.recipes: dict[str, tuple[int, tuple]] = {}
        depth = cfg["templates"][self.template]["depth"]
        self.target = items.pop()
        if depth == 1:
            self.recipes[self.target] = (rng.randint(1, my), raw_ings(rng.randint(1, 2)))
        else:
            ings = []
            for _ in range(rng.randint(1, 2)):
                inter = items.pop()
                y = rng.randint(1, my)
                self.recipes[inter] = (y, raw_ings(rng.randint(1, 2)))
                ings.append((rng.randint(1, y), inter))
            if rng.random() < 0.5:
                ings.append((rng.randint(1, mc), rng.choice(sorted(raws))))
            merged: dict[str, int] = {}
            for n, i in ings:
                merged[i] = merged.get(i, 0) + n
            self.recipes[self.target] = (1, tuple(sorted(((n, i) for i, n in merged.items()), key=lambda p: p[1])))
        for _ in range(rng.randint(*gen["n_distractor_recipes"])):
            self.recipes[items.pop()] = (rng.randint(1, my), raw_ings(rng.randint(1, 2)))
        self.position = TABLE
        self.inventory: dict[str, int] = {}

    def _solvable(self) -> bool:
        raws, order = expand(self.recipes, self.target)
        if any(n > 9 for n in raws.values()) or any(r not in self.raw_at for r in raws):
            return False
        return recipe_depth(self.recipes, self.target) == self.cfg["templates"][self.template]["depth"]

    def _instruction_text(self) -> str:
        return f"craft 1 {self.target}"

    def _initial_text(self) -> str:
        return f"You are at {TABLE}. From here you can go to: {', '.join(self.nodes)}."

    # helpers ---------------------------------------------------------------
    def raws_at(self, node: str) -> list[str]:
        return sorted(r for r, n in self.raw_at.items() if n == node)

    def describe(self, loc: str) -> str:
        if loc == TABLE:
            return ""
        here = self.raws_at(loc)
        return f"Here you can get: {', '.join(here)}." if here else "There is nothing to get here."

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
        return {
            "go to {loc}": "navigate",
            "get {n} {raw}": "interact",
            "craft {n} {item} using {ingredients}": "craft",
            "examine {loc}": "observe",
            "look": "observe",
            "inventory": "observe",
        }.get(tpl, "noop")

    def _resolve(self, text: str):
        tpl, m = self.match(text)
        if m is None:
            return None
        here = self.position
        if tpl == "look":
            return " ".join(p for p in (f"You are at {here}.", self.describe(here)) if p), lambda: None
        if tpl == "inventory":
            if not self.inventory:
                return "Inventory: empty.", lambda: None
            return "Inventory: " + ", ".join(f"[{k}] ({v})" for k, v in sorted(self.inventory.items())) + ".", lambda: None
        if tpl == "go to {loc}":
            loc = m.group(1)
            if loc == here or (loc != TABLE and loc not in self.nodes):
                return None

            def go():
                self.position = loc

            return " ".join(p for p in (f"You arrive at {loc}.", self.describe(loc)) if p), go
        if tpl == "get {n} {raw}":
            n, raw = int(m.group(1)), m.group(2)
            if self.raw_at.get(raw) != here:
                return None

            def get():
                self.inventory[raw] = self.inventory.get(raw, 0) + n

            return f"Got {n} {raw}.", get
        if tpl == "examine {loc}":
            if m.group(1) != TABLE or here != TABLE:
                return None
            body = "; ".join(recipe_text(i, r) for i, r in sorted(self.recipes.items()))
            return f"Crafting recipes: {body}.", lambda: None
        if tpl == "craft {n} {item} using {ingredients}":
            item = m.group(2)
            if here != TABLE or item not in self.recipes or recipe_command(item, self.recipes[item]) != text:
                return None
            y, ings = self.recipes[item]
            if any(self.inventory.get(i, 0) < n for n, i in ings):
                return None

            def craft():
                for n, i in ings:
                    self.inventory[i] -= n
                    if not self.inventory[i]:
                        del self.inventory[i]
                self.inventory[item] = self.inventory.get(item, 0) + y

            return f"Crafted {y} {item}.", craft
        return None

    def _apply(self, text: str) -> tuple[str, bool]:
        r = self._resolve(text)
        if r is None:
            return f"Could not execute {text}.", True
        out, effect = r
        effect()
        if self.inventory.get(self.target, 0) >= 1:
            self.success = True
            self.done = True
        return out, False

    def _admissible(self) -> list[str]:
        out = ["look", "inventory"]
        out += [f"go to {n}" for n in [TABLE, *self.nodes] if n != self.position]
        if self.position == TABLE:
            out.append(f"examine {TABLE}")
            out += [recipe_command(i, r) for i, r in self.recipes.items()]
        else:
            out += [f"get {n} {r}" for r in self.raws_at(self.position) for n in range(1, 10)]
        return [a for a in out if self._resolve(a) is not None]

    def _relocate(self, obj: str, dest: str) -> None:
        if obj not in self.raw_at:
            raise EnvError(f"no raw material {obj!r}")
        if dest not in self.nodes:
            raise EnvError(f"no node {dest!r}")
        if self.raw_at[obj] == dest:
            raise EnvError(f"{obj} is already at {dest}")
        self.raw_at[obj] = dest

    def _explored_set(self, explored) -> list[str]:
        return list(self.nodes) if explored is None else [n for n in explored if n in self.nodes]

    def _facts(self, explored) -> list:
        out = [fact("spatial", TABLE, "reachable", "true"), fact("affordance", TABLE, "examine", "lists crafting recipes")]
        for n in self.nodes:
            out.append(fact("spatial", n, "reachable", "true"))
        for r, n in self.raw_at.items():
            out.append(fact("spatial", r, "at", n))
            out.append(fact("affordance", r, "get", "raw material"))
        for i, rec in self.recipes.items():
            out.append(fact("affordance", i, "craft", recipe_effect(rec)))
        for n in self._explored_set(explored):
            for r in sorted(self.raw_at):
                if self.raw_at[r] != n:
                    out.append(fact("negative", r, "not_in", n))
        return out

    def _state(self) -> dict:
        return {
            "position": self.position,
            "inventory": dict(sorted(self.inventory.items())),
            "raw_at": dict(sorted(self.raw_at.items())),
            "nodes": list(self.nodes),
            "recipes": {i: [y, [list(p) for p in ings]] for i, (y, ings) in sorted(self.recipes.items())},
            "target": self.target,
        }

    def _task_info(self) -> dict:
        raws, order = expand(self.recipes, self.target)
        return {"template": self.template, "target": self.target, "raws": dict(sorted(raws.items())), "craft_order": order}

    def perception(self) -> dict:
        return {
            "position": self.position,
            "inventory": dict(sorted(self.inventory.items())),
            "admissible": [a.text for a in self.admissible_actions()],
        }

    def state_key(self):
        return (self.position, tuple(sorted(self.inventory.items())), tuple(sorted(self.raw_at.items())), self.success)
