"""Grid game: colour-frame mazes with a move counter and patrolling hazards.

Rules
-----
* ``ACTION1..ACTION4`` move the player one cell; which action goes which way
  is a per-seed permutation.
* A move in the same direction as the previous move (or the first move of a
  level) costs 1 counter pixel, a turn costs 2, a blocked move costs 1.
* Hazards patrol the interior of one corridor segment. They advance one cell
  per successful player move and bounce at the segment ends, so a hazard on a
  track of L cells repeats with period 2*(L-1). Every hazard sits on the
  lexicographically smaller end of its track when a level starts.
* Sharing a cell with a hazard after a move ends the game. So does reaching
  a zero counter before the target.
* The task succeeds when the last level is completed.
"""

from __future__ import annotations

import copy
import math
from typing import Optional

import numpy as np

from .. import _kernels
from .base import Env, EnvError, fact
from .config import load_env_config

DIR_NAMES = ("up", "down", "left", "right")
ACTIONS = ("ACTION1", "ACTION2", "ACTION3", "ACTION4")
HEX = "0123456789abcdef"
_HEX_TABLE = bytes.maketrans(bytes(range(16)), HEX.encode("ascii"))
WALKABLE_COLORS = frozenset({2, 3, 8, 9, 14})

GRID_RULES = (
    ("move", "consumes", "1 counter pixel"),
    ("turn", "consumes", "2 counter pixels"),
    ("blocked move", "consumes", "1 counter pixel"),
    ("hazard", "moves", "one cell per successful move"),
    ("hazard", "bounces", "at track ends"),
    ("hazard contact", "causes", "game over"),
    ("target", "completes", "level"),
    ("counter exhaustion", "causes", "game over"),
)


def cell_name(cell) -> str:
    return f"{cell[0]},{cell[1]}"


def parse_cell(name: str) -> tuple[int, int]:
    r, c = name.split(",")
    return int(r), int(c)


def key_cells(walk: np.ndarray) -> list[tuple[int, int]]:
    """Walkable cells that are not the middle of a straight corridor."""
    H, W = walk.shape
    out = []
    for r, c in zip(*np.nonzero(walk)):
        nb = [
            k
            for k in range(4)
            if 0 <= r + _kernels.DR[k] < H and 0 <= c + _kernels.DC[k] < W and walk[r + _kernels.DR[k], c + _kernels.DC[k]]
        ]
        if not (nb == [0, 1] or nb == [2, 3]):
            out.append((int(r), int(c)))
    return sorted(out)


def corridor_edges(walk: np.ndarray, keys) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    keyset = set(keys)
    H, W = walk.shape
    edges = set()
    for r, c in keys:
        for k in range(4):
            nr, nc = r + _kernels.DR[k], c + _kernels.DC[k]
            while 0 <= nr < H and 0 <= nc < W and walk[nr, nc]:
                if (nr, nc) in keyset:
                    edges.add(tuple(sorted([(r, c), (nr, nc)])))
                    break
                nr, nc = nr + _kernels.DR[k], nc + _kernels.DC[k]
    return sorted(edges)


def layout_facts(walk: np.ndarray, target, tracks) -> list:
    keys = key_cells(walk)
    out = [fact("spatial", cell_name(k), "reachable", "true") for k in keys]
    out += [fact("spatial", cell_name(a), "connects", cell_name(b)) for a, b in corridor_edges(walk, keys)]
    out.append(fact("spatial", "target", "at", cell_name(target)))
    out += [fact("spatial", "hazard", "patrols", f"{cell_name(t[0])}-{cell_name(t[-1])}") for t in tracks]
    return out


class Level:
    """Static layout of one level plus its initial counter."""

    def __init__(self, walk, start, target, tracks, counter, opt_cost, opt_moves):
        self.walk = walk
        self.start = start
        self.target = target
        self.tracks = tracks
        self.counter = counter
        self.opt_cost = opt_cost
        self.opt_moves = opt_moves

    @property
    def period(self) -> int:
        p = 1
        for t in self.tracks:
            p = math.lcm(p, 2 * (len(t) - 1))
        return p

    def hazard_arrays(self):
        if not self.tracks:
            return np.zeros((0, 1, 2), np.int32), np.zeros(0, np.int32)
        L = max(len(t) for t in self.tracks)
        cells = np.zeros((len(self.tracks), L, 2), np.int32)
        for i, t in enumerate(self.tracks):
            cells[i, : len(t)] = t
        return cells, np.array([len(t) for t in self.tracks], np.int32)

    def hazard_cells(self, phase: int) -> list[tuple[int, int]]:
        return [t[_kernels.hazard_index(phase, len(t))] for t in self.tracks]


class GridEnv(Env):
    env_id = "grid"
    templates = tuple(load_env_config("grid")["templates"])

    def __init__(self, seed: int, template: str = "maze", config: Optional[dict] = None):
        self.cfg = config or load_env_config("grid")
        super().__init__(seed, template)

    # generation ------------------------------------------------------------
    def _gen_level(self, rng, spec) -> Optional[Level]:
        gen, size = self.cfg["generation"], self.cfg["size"]
        n = gen["lattice"]
        lo, hi = gen["gaps"]
        rows, cols = [gen["origin"]], [gen["origin"]]
        for _ in range(n - 1):
            rows.append(rows[-1] + rng.randint(lo, hi))
            cols.append(cols[-1] + rng.randint(lo, hi))
        lattice = [(i, j) for i in range(n) for j in range(n)]

        def nbrs(a):
            i, j = a
            return [(i + di, j + dj) for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)) if 0 <= i + di < n and 0 <= j + dj < n]

        first = rng.choice(lattice)
        tree, edges = {first}, set()
        while len(tree) < spec["nodes"]:
            cand = sorted((a, b) for a in tree for b in nbrs(a) if b not in tree)
            a, b = rng.choice(cand)
            tree.add(b)
            edges.add(tuple(sorted((a, b))))
        for _ in range(spec["loops"]):
            cand = sorted({tuple(sorted((a, b))) for a in tree for b in nbrs(a) if b in tree} - edges)
            if cand:
                edges.add(rng.choice(cand))
        walk = np.zeros((size, size), np.uint8)
        pos = {a: (rows[a[0]], cols[a[1]]) for a in tree}
        for a in tree:
            walk[pos[a]] = 1
        interiors = {}
        for a, b in sorted(edges):
            (r0, c0), (r1, c1) = pos[a], pos[b]
            cells = [(r, c) for r in range(min(r0, r1), max(r0, r1) + 1) for c in range(min(c0, c1), max(c0, c1) + 1)]
            for cell in cells:
                walk[cell] = 1
            interiors[(a, b)] = sorted(x for x in cells if x not in (pos[a], pos[b]))
        start_node = rng.choice(sorted(tree))
        # BFS over lattice edges; farthest node is the target
        dist = {start_node: 0}
        frontier = [start_node]
        while frontier:
            nxt = []
            for a in frontier:
                for b in nbrs(a):
                    if b in tree and b not in dist and tuple(sorted((a, b))) in edges:
                        dist[b] = dist[a] + 1
                        nxt.append(b)
            frontier = nxt
        far = max(dist.values())
        target_node = min(a for a, d in dist.items() if d == far)
        hz_edges = sorted(edges)
        rng.shuffle(hz_edges)
        tracks = [interiors[e] for e in sorted(hz_edges[: spec["hazards"]])]
        level = Level(walk, pos[start_node], pos[target_node], tracks, 0, 0, 0)
        cells, lens = level.hazard_arrays()
        cost, dirs = _kernels.plan_grid(walk, *level.start, *level.target, cells, lens, level.period, 2, 64)
        if cost < 0 or len(dirs) > gen["max_plan_moves"]:
            return None
        level.counter = min(64, cost + gen["counter_slack"])
        level.opt_cost, level.opt_moves = cost, len(dirs)
        return level

    def _generate(self, rng) -> None:
        self.levels = [self._gen_level(rng, spec) for spec in self.cfg["levels"]]
        perm = list(range(4))
        rng.shuffle(perm)
        self.perm = tuple(perm)
        self.level_idx = 0
        self.levels_completed = 0
        if all(lv is not None for lv in self.levels):
            self._start_level()
        self.event = "start"
        self.state = "playing"

    def _solvable(self) -> bool:
        return all(lv is not None for lv in self.levels)

    def _start_level(self) -> None:
        lv = self.levels[self.level_idx]
        self.player = lv.start
        self.counter = lv.counter
        self.phase = 0
        self.lastdir = _kernels.NO_DIR

    @property
    def level(self) -> Level:
        return self.levels[self.level_idx]

    def _instruction_text(self) -> str:
        return "reach the target cell (colour 14) on each level before the counter runs out"

    # rendering -------------------------------------------------------------
    def frame(self) -> np.ndarray:
        col = self.cfg["colors"]
        lv = self.level
        g = np.full((self.cfg["size"], self.cfg["size"]), col["wall"], np.uint8)
        g[lv.walk.astype(bool)] = col["corridor"]
        for t in lv.tracks:
            for cell in t:
                g[cell] = col["track"]
        g[lv.target] = col["target"]
        for cell in lv.hazard_cells(self.phase):
            g[cell] = col["hazard"]
        g[self.player] = col["player"]
        g[-1, :] = col["background"]
        g[-1, : self.counter] = col["counter"]
        return g

    def render(self) -> str:
        g = self.frame()
        text = g.tobytes().translate(_HEX_TABLE).decode("ascii")
        w = g.shape[1]
        rows = [text[i : i + w] for i in range(0, len(text), w)]
        return f"LEVEL {self.level_idx + 1} STATE {self.state} EVENT {self.event}\n" + "\n".join(rows)

    def _initial_text(self) -> str:
        return self.render()

    # engine ----------------------------------------------------------------
    @classmethod
    def action_template(cls, text: str) -> str:
        text = " ".join(text.split())
        return text if text in ACTIONS or text == "look" else "<unrecognized>"

    @classmethod
    def action_kind(cls, text: str) -> str:
        tpl = cls.action_template(text)
        if tpl in ACTIONS:
            return "grid_action"
        return "observe" if tpl == "look" else "noop"

    def _blocked(self, d: int) -> bool:
        r, c = self.player[0] + _kernels.DR[d], self.player[1] + _kernels.DC[d]
        walk = self.level.walk
        return not (0 <= r < walk.shape[0] and 0 <= c < walk.shape[1] and walk[r, c])

    def _apply(self, text: str) -> tuple[str, bool]:
        costs = self.cfg["costs"]
        if text == "look":
            self.event = "look"
            return self.render(), False
        if text not in ACTIONS:
            self.event = "invalid"
            return self.render(), True
        d = self.perm[ACTIONS.index(text)]
        if self._blocked(d):
            self.counter = max(0, self.counter - costs["blocked"])
            self.event = "blocked"
            if self.counter == 0:
                self._end("exhausted")
            return self.render(), True
        cost = costs["straight"] if self.lastdir in (_kernels.NO_DIR, d) else costs["turn"]
        self.counter = max(0, self.counter - cost)
        self.player = (self.player[0] + _kernels.DR[d], self.player[1] + _kernels.DC[d])
        self.lastdir = d
        self.phase += 1
        if self.player in self.level.hazard_cells(self.phase):
            self._end("dead")
        elif self.player == self.level.target:
            self.levels_completed += 1
            self.event = "level_complete"
            if self.level_idx + 1 == len(self.levels):
                self.state = "won"
                self.success = True
                self.done = True
            else:
                self.level_idx += 1
                self._start_level()
        elif self.counter == 0:
            self._end("exhausted")
        else:
            self.event = "moved"
        return self.render(), False

    def _end(self, why: str) -> None:
        self.event = why
        self.state = "game_over"
        self.done = True

    def restart_level(self):
        """Put player, counter and hazards back to the start of the current level."""
        if self.done:
            raise EnvError("restart on a terminal environment")
        self._start_level()
        self.event = "restart"
        from ..core import Observation

        obs = Observation.make(self.render(), self.step_counter, False)
        self.last_observation = obs
        self.events.append({"control": "restart_level", "observation": obs.text})
        return obs

    def _admissible(self) -> list[str]:
        return ["look"] + [a for i, a in enumerate(ACTIONS) if not self._blocked(self.perm[i])]

    def _relocate(self, obj: str, dest: str) -> None:
        if obj != "target":
            raise EnvError(f"no object {obj!r}")
        cell = parse_cell(dest)
        if cell not in key_cells(self.level.walk) or cell == self.level.target or cell == self.player:
            raise EnvError(f"cannot move target to {dest!r}")
        # levels are shared between clones, so replace instead of mutating
        lv = copy.copy(self.level)
        lv.target = cell
        self.levels[self.level_idx] = lv

    def clone(self) -> "GridEnv":
        # everything mutable during play is a scalar apart from these two lists
        sim = copy.copy(self)
        sim.events = list(self.events)
        sim.levels = list(self.levels)
        return sim

    def _facts(self, explored) -> list:
        lv = self.level
        out = layout_facts(lv.walk, lv.target, lv.tracks)
        out += [fact("affordance", a, "moves", DIR_NAMES[self.perm[i]]) for i, a in enumerate(ACTIONS)]
        out += [fact("rule", *r) for r in GRID_RULES]
        return out

    def _state(self) -> dict:
        lv = self.level
        return {
            "level": self.level_idx + 1,
            "player": list(self.player),
            "target": list(lv.target),
            "counter": self.counter,
            "phase": self.phase,
            "lastdir": self.lastdir,
            "levels_completed": self.levels_completed,
            "hazards": [list(c) for c in lv.hazard_cells(self.phase)],
            "tracks": [[list(c) for c in t] for t in lv.tracks],
            "action_dirs": {a: DIR_NAMES[self.perm[i]] for i, a in enumerate(ACTIONS)},
            "state": self.state,
        }

    def _task_info(self) -> dict:
        return {"template": self.template, "target": cell_name(self.level.target), "start": cell_name(self.level.start)}

    def perception(self) -> dict:
        return {
            "position": cell_name(self.player),
            "counter": self.counter,
            "level": self.level_idx + 1,
            "admissible": [a.text for a in self.admissible_actions()],
        }

    def state_key(self):
        return (self.level_idx, self.player, self.lastdir, self.phase, self.counter, self.levels_completed, self.done, self.level.target)
