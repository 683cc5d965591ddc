"""Deterministic seeded worlds: a household text world, a crafting world and a grid game."""

from .base import Env, EnvError, GenerationError, GroundTruthSnapshot, PerturbationSpec, derive_seed, rng_for
from .craft import CraftEnv
from .grid import GridEnv
from .house import HouseEnv
from .replay import ReplayResult, dump_replay, replay, write_replay

ENV_CLASSES = {"house": HouseEnv, "craft": CraftEnv, "grid": GridEnv}

# task families: "science" reuses the house engine with its state-change templates
FAMILIES = {
    "house": ("house", ("pick_place", "heat_place", "cool_place", "clean_place", "examine_light", "pick_two")),
    "science": ("house", ("heat_place", "cool_place", "clean_place")),
    "craft": ("craft", ("craft_single", "craft_multi")),
    "grid": ("grid", ("maze",)),
}


def make(env_id: str, seed: int, template: str) -> Env:
    try:
        cls = ENV_CLASSES[env_id]
    except KeyError:
        raise ValueError(f"unknown env_id {env_id!r}") from None
    return cls(seed, template)


def env_class(env_id: str):
    return ENV_CLASSES[env_id]


def template_for(family: str, seed: int, templates=None) -> str:
    pool = tuple(templates) if templates else FAMILIES[family][1]
    return pool[seed % len(pool)]


__all__ = [
    "Env",
    "EnvError",
    "GenerationError",
    "GroundTruthSnapshot",
    "PerturbationSpec",
    "HouseEnv",
    "CraftEnv",
    "GridEnv",
    "ENV_CLASSES",
    "FAMILIES",
    "make",
    "env_class",
    "template_for",
    "derive_seed",
    "rng_for",
    "replay",
    "dump_replay",
    "write_replay",
    "ReplayResult",
]
