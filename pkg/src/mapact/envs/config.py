"""Loading and validating the declarative world definitions in ``envs/data``."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

_SCHEMA = {
    "house": {
        "env_id": str,
        "start": str,
        "locations": dict,
        "objects": dict,
        "templates": dict,
        "generation": {"n_locations": list, "n_distractors": list, "max_closed": int},
    },
    "craft": {
        "env_id": str,
        "table": str,
        "nodes": list,
        "raws": list,
        "items": list,
        "templates": dict,
        "generation": {
            "n_nodes": list,
            "n_raws": list,
            "max_count": int,
            "max_yield": int,
            "n_distractor_recipes": list,
        },
    },
    "grid": {
        "env_id": str,
        "size": int,
        "colors": dict,
        "costs": dict,
        "levels": list,
        "templates": dict,
        "generation": {
            "lattice": int,
            "gaps": list,
            "origin": int,
            "counter_slack": int,
            "max_plan_moves": int,
        },
    },
}

_LOCATION_KEYS = {"kind", "station"}
_HOUSE_TEMPLATE_KEYS = {"text", "needs", "count"}
_LEVEL_KEYS = {"nodes", "hazards", "loops"}


class ConfigError(ValueError):
    pass


def _check(node, schema, where: str) -> None:
    if not isinstance(node, dict):
        raise ConfigError(f"{where}: expected a mapping")
    unknown = set(node) - set(schema)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = set(schema) - set(node)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")
    for key, sub in schema.items():
        if isinstance(sub, dict):
            _check(node[key], sub, f"{where}.{key}")
        elif not isinstance(node[key], sub):
            raise ConfigError(f"{where}.{key}: expected {sub.__name__}")


def validate(cfg: dict) -> dict:
    env_id = cfg.get("env_id") if isinstance(cfg, dict) else None
    if env_id not in _SCHEMA:
        raise ConfigError(f"unknown env_id {env_id!r}")
    _check(cfg, _SCHEMA[env_id], env_id)
    if env_id == "house":
        for name, loc in cfg["locations"].items():
            if set(loc) - _LOCATION_KEYS or loc.get("kind") not in ("surface", "container", "fixture"):
                raise ConfigError(f"house.locations.{name}: bad entry {loc}")
        for name, t in cfg["templates"].items():
            if set(t) != _HOUSE_TEMPLATE_KEYS:
                raise ConfigError(f"house.templates.{name}: keys must be {sorted(_HOUSE_TEMPLATE_KEYS)}")
    if env_id == "grid":
        for i, lvl in enumerate(cfg["levels"]):
            if set(lvl) != _LEVEL_KEYS:
                raise ConfigError(f"grid.levels[{i}]: keys must be {sorted(_LEVEL_KEYS)}")
    return cfg


@lru_cache(maxsize=None)
def _load_builtin(env_id: str) -> dict:
    text = resources.files("mapact.envs").joinpath("data", f"{env_id}.yaml").read_text(encoding="utf-8")
    return validate(yaml.safe_load(text))


def load_env_config(env_id: str, path: Optional[str] = None) -> dict:
    if path is None:
        return _load_builtin(env_id)
    cfg = validate(yaml.safe_load(Path(path).read_text(encoding="utf-8")))
    if cfg["env_id"] != env_id:
        raise ConfigError(f"{path} defines {cfg['env_id']}, not {env_id}")
    return cfg
