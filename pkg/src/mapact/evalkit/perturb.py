"""Relocating task objects in the middle of an acting rollout."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..envs import PerturbationSpec, rng_for
from ..envs.grid import cell_name, key_cells
from ..envs.house import obj_class


@dataclass(frozen=True)
class PerturbationConfig:
    probability: float = 1.0
    # inclusive range of acting steps after which the relocation fires
    step_range: tuple[int, int] = (1, 3)
    max_objects: int = 2

    def __post_init__(self):
        object.__setattr__(self, "step_range", tuple(self.step_range))
        lo, hi = self.step_range
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must lie in [0, 1]")
        if not 1 <= lo <= hi:
            raise ValueError("step_range must satisfy 1 <= lo <= hi")
        if self.max_objects < 1:
            raise ValueError("max_objects must be >= 1")


def _house_moves(env, rng, k: int):
    task = env._task_info()
    cls, dest = task["target_class"], task["dest"]
    objs = sorted(o for o, loc in env.placement.items() if obj_class(o) == cls and loc != dest)
    if not objs:
        return []
    chosen = rng.sample(objs, min(k, len(objs)))
    out = []
    for o in sorted(chosen):
        src = env.placement[o]
        options = [l for l in env.holding_locations() if l not in (src, dest)]
        if options:
            out.append((o, rng.choice(options), src))
    return out


def _craft_moves(env, rng, k: int):
    raws = sorted(env._task_info()["raws"])
    chosen = rng.sample(raws, min(k, len(raws)))
    out = []
    for r in sorted(chosen):
        src = env.raw_at[r]
        options = [n for n in env.nodes if n != src]
        if options:
            out.append((r, rng.choice(options), src))
    return out


def _grid_moves(env, rng, k: int):
    lv = env.level
    options = [c for c in key_cells(lv.walk) if c not in (lv.target, env.player)]
    if not options:
        return []
    return [("target", cell_name(rng.choice(options)), cell_name(lv.target))]


_MOVES = {"house": _house_moves, "craft": _craft_moves, "grid": _grid_moves}


def plan_perturbation(seed: int, config: PerturbationConfig = PerturbationConfig()):
    """``(t_perturb, builder)`` for one seed, or None when the seed is not perturbed.

    Both the decision and the relocations come from generators derived from
    the seed, so a perturbed run replays exactly.
    """
    rng = rng_for(seed, "perturb")
    if rng.random() >= config.probability:
        return None
    t = rng.randint(*config.step_range)
    k = rng.randint(1, config.max_objects)
    sub = rng.getrandbits(64)

    def build(env) -> Optional[tuple[PerturbationSpec, list]]:
        moves = _MOVES[env.env_id](env, rng_for(sub, "moves"), k)
        if not moves:
            return None
        spec = PerturbationSpec(env.step_counter, tuple((o, d) for o, d, _ in moves))
        return spec, moves

    return t, build


__all__ = ["PerturbationConfig", "plan_perturbation"]
