import random

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from mapact.envs import (
    FAMILIES,
    CraftEnv,
    EnvError,
    GridEnv,
    HouseEnv,
    PerturbationSpec,
    dump_replay,
    make,
    replay,
    template_for,
)
from mapact.envs.config import ConfigError, load_env_config, validate
from mapact.envs.craft import TABLE, expand, recipe_command, recipe_depth
from mapact.envs.house import FAILURE, obj_class


def fresh(env_id, seed, template):
    env = make(env_id, seed, template)
    env.reset()
    return env


def random_walk(env, rng, n):
    for _ in range(n):
        if env.done:
            break
        acts = env.admissible_actions()
        env.step(rng.choice(acts).text)


# generation and determinism ----------------------------------------------------


def test_unknown_env_and_template():
    with pytest.raises(ValueError):
        make("kitchen", 0, "x")
    with pytest.raises(ValueError):
        make("house", 0, "craft_single")


def test_template_for_cycles_family_pool():
    assert [template_for("science", s) for s in range(4)] == ["heat_place", "cool_place", "clean_place", "heat_place"]
    assert template_for("house", 3, ["pick_two"]) == "pick_two"


@pytest.mark.parametrize("family", sorted(FAMILIES))
def test_same_seed_same_bytes(family):
    env_id, templates = FAMILIES[family]
    for seed in range(5):
        t = templates[seed % len(templates)]
        a, b = fresh(env_id, seed, t), fresh(env_id, seed, t)
        assert a.instruction == b.instruction and a.last_observation == b.last_observation
        random_walk(a, random.Random(seed), 15)
        for ev in a.events[1:]:
            if "action" in ev:
                assert b.step(ev["action"])[0].text == ev["observation"]
        assert a.ground_truth() == b.ground_truth()


def test_reset_after_step_refused():
    env = fresh("house", 1, "pick_place")
    env.step("look")
    with pytest.raises(EnvError):
        env.reset()


def test_step_after_done_refused():
    env = fresh("craft", 2, "craft_single")
    raws, order = expand(env.recipes, env.target)
    for raw, n in sorted(raws.items()):
        env.step(f"go to {env.raw_at[raw]}")
        env.step(f"get {n} {raw}")
    env.step(f"go to {TABLE}")
    for item in order:
        env.step(recipe_command(item, env.recipes[item]))
    assert env.done and env.success
    with pytest.raises(EnvError):
        env.step("look")
    assert env.admissible_actions() == []


# house -----------------------------------------------------------------------


def test_house_failure_text():
    env = fresh("house", 3, "pick_place")
    obs, done, ok = env.step("fly to the moon")
    assert obs.text == FAILURE and obs.error_flag and not done and not ok


def test_house_generation_bounds():
    cfg = load_env_config("house")
    for seed in range(40):
        t = template_for("house", seed)
        env = make("house", seed, t)
        lo, hi = cfg["generation"]["n_locations"]
        assert lo <= len(env.locations) <= hi
        assert sum(s["kind"] == "container" for s in env.locations.values()) <= cfg["generation"]["max_closed"]
        targets = [o for o, w in env.placement.items() if obj_class(o) == env.target_cls and w != env.dest]
        assert len(targets) >= env.count


def test_closed_container_admissible():
    for seed in range(60):
        env = fresh("house", seed, "pick_place")
        closed = sorted(env.closed)
        if not closed:
            continue
        loc = closed[0]
        env.step(f"go to {loc}")
        acts = [a.text for a in env.admissible_actions()]
        assert f"open {loc}" in acts
        assert not any(a.startswith("take ") and a.endswith(f"from {loc}") for a in acts)
        return
    pytest.fail("no seed with a closed container")


def test_open_reveals_contents_and_take():
    for seed in range(60):
        env = fresh("house", seed, "pick_place")
        for loc in sorted(env.closed):
            inside = env.contents(loc)
            if not inside:
                continue
            env.step(f"go to {loc}")
            obs, _, _ = env.step(f"open {loc}")
            assert all(o in obs.text for o in inside)
            obs, _, _ = env.step(f"take {inside[0]} from {loc}")
            assert not obs.error_flag and env.inventory == inside[0]
            obs, _, _ = env.step(f"take {inside[0]} from {loc}")
            assert obs.text == FAILURE
            return
    pytest.fail("no seed with a filled closed container")


def test_heat_flags_and_exclusive_temperature():
    env = fresh("house", 4, "heat_place")
    obj = next(o for o in sorted(env.placement) if obj_class(o) == env.target_cls and env.placement[o] != env.dest)
    src = env.placement[obj]
    env.step(f"go to {src}")
    if src in env.closed:
        env.step(f"open {src}")
    assert not env.step(f"take {obj} from {src}")[0].error_flag
    env.step(f"go to {env.station}")
    obs, _, _ = env.step(f"heat {obj} with {env.station}")
    assert not obs.error_flag and env.flags[obj] == {"hot"}


def house_universe(env):
    names = list(env.locations) + list(env.placement)
    out = ["look", "inventory"]
    for a in names:
        out += [f"go to {a}", f"open {a}", f"close {a}", f"use {a}"]
        for b in names:
            out += [f"take {a} from {b}", f"put {a} in/on {b}"]
            out += [f"{v} {a} with {b}" for v in ("heat", "cool", "clean")]
    return out


def craft_universe(env):
    out = ["look", "inventory", f"examine {TABLE}"]
    out += [f"go to {n}" for n in [TABLE, *env.nodes]]
    out += [f"get {n} {r}" for r in env.raw_at for n in range(1, 10)]
    out += [recipe_command(i, r) for i, r in env.recipes.items()]
    return out


@pytest.mark.parametrize(
    "env_id,templates,universe",
    [("house", FAMILIES["house"][1], house_universe), ("craft", FAMILIES["craft"][1], craft_universe)],
)
def test_admissible_sound_and_complete(env_id, templates, universe):
    """Exhaustive execution from copies of states along random walks."""
    for seed in range(6):
        env = fresh(env_id, seed, templates[seed % len(templates)])
        rng = random.Random(seed)
        for _ in range(8):
            if env.done:
                break
            listed = {a.text for a in env.admissible_actions()}
            for cmd in universe(env):
                ok = not env.clone().step(cmd)[0].error_flag
                assert ok == (cmd in listed), cmd
            random_walk(env, rng, 1)


def brute_fact_count(env):
    """Count facts straight from the generated layout, location by location."""
    n = 0
    for spec in env.locations.values():
        n += 1 + (spec["kind"] == "container") + (spec["station"] is not None)
    for o in env.placement:
        n += 2 + len(env.flags[o])
    classes = {obj_class(o) for o in env.placement}
    for loc, spec in env.locations.items():
        if spec["kind"] == "fixture":
            continue
        present = {obj_class(o) for o, w in env.placement.items() if w == loc}
        n += len(classes - present)
    return n


def test_fact_count_matches_enumeration_on_six_location_instances():
    checked = 0
    for seed in range(200):
        env = make("house", seed, template_for("house", seed))
        if len(env.locations) != 6:
            continue
        env.reset()
        random_walk(env, random.Random(seed), 10)
        assert len(env.ground_truth().facts) == brute_fact_count(env)
        checked += 1
    assert checked >= 10


def test_snapshot_determinism_and_relocation():
    a = make("house", 11, "pick_place").ground_truth()
    b = make("house", 11, "pick_place").ground_truth()
    assert a.fact_keys() == b.fact_keys()
    env = fresh("house", 11, "pick_place")
    obj = sorted(env.placement)[0]
    dest = next(l for l in env.holding_locations() if l != env.placement[obj])
    env.step("look")
    env.apply_perturbation(PerturbationSpec(1, ((obj, dest),)))
    assert ("spatial", obj, "at", dest) in env.ground_truth().fact_keys()


def test_perturbation_checks():
    env = fresh("house", 12, "pick_place")
    obj = sorted(env.placement)[0]
    dest = next(l for l in env.holding_locations() if l != env.placement[obj])
    with pytest.raises(EnvError):
        env.apply_perturbation(PerturbationSpec(1, ((obj, dest),)))
    env.step("look")
    with pytest.raises(EnvError):
        env.apply_perturbation(PerturbationSpec(1, (("unicorn 1", dest),)))
    with pytest.raises(EnvError):
        env.apply_perturbation(PerturbationSpec(1, ((obj, env.placement[obj]),)))
    before = env.ground_truth()
    env.apply_perturbation(PerturbationSpec(1, ((obj, dest),)))
    after = env.ground_truth()
    changed = {k for k in before.fact_keys() ^ after.fact_keys() if k[0] == "spatial"}
    assert changed == {("spatial", obj, "at", before.state["placement"][obj]), ("spatial", obj, "at", dest)}
    assert env.events[-1]["control"] == "perturb"
    with pytest.raises(ValueError):
        PerturbationSpec(0, ((obj, dest),))
    with pytest.raises(ValueError):
        PerturbationSpec(1, ())


# craft -----------------------------------------------------------------------


def test_craft_consumes_exact_counts():
    env = fresh("craft", 5, "craft_multi")
    raws, order = expand(env.recipes, env.target)
    for raw, n in sorted(raws.items()):
        env.step(f"go to {env.raw_at[raw]}")
        env.step(f"get {n} {raw}")
    env.step(f"go to {TABLE}")
    first = order[0]
    y, ings = env.recipes[first]
    before = dict(env.inventory)
    obs, _, _ = env.step(recipe_command(first, env.recipes[first]))
    assert obs.text == f"Crafted {y} {first}."
    for n, ing in ings:
        assert env.inventory.get(ing, 0) == before[ing] - n
    assert env.inventory[first] == before.get(first, 0) + y


def test_craft_failure_text_and_wrong_recipe():
    env = fresh("craft", 6, "craft_single")
    obs, _, _ = env.step("craft 1 widget using 2 air")
    assert obs.text == "Could not execute craft 1 widget using 2 air." and obs.error_flag


def test_craft_depths():
    for seed in range(30):
        for t, depth in (("craft_single", 1), ("craft_multi", 2)):
            env = make("craft", seed, t)
            assert recipe_depth(env.recipes, env.target) == depth
            raws, _ = expand(env.recipes, env.target)
            assert all(r in env.raw_at for r in raws)


def test_examine_lists_every_recipe():
    env = fresh("craft", 7, "craft_multi")
    obs, _, _ = env.step(f"examine {TABLE}")
    for item in env.recipes:
        assert item in obs.text


@given(st.integers(0, 500), st.lists(st.integers(0, 10**6), max_size=25))
@settings(max_examples=30, deadline=None)
def test_craft_conservation(seed, picks):
    """Inventory only changes by gets and exact recipe consumption."""
    env = fresh("craft", seed, "craft_multi")
    for p in picks:
        if env.done:
            break
        acts = env.admissible_actions()
        cmd = acts[p % len(acts)].text
        before = dict(env.inventory)
        obs, _, _ = env.step(cmd)
        if cmd.startswith("get "):
            n, raw = cmd.split(" ", 2)[1:]
            before[raw] = before.get(raw, 0) + int(n)
        elif cmd.startswith("craft "):
            item = cmd.split(" ")[2]
            item = next(i for i in env.recipes if cmd == recipe_command(i, env.recipes[i]))
            y, ings = env.recipes[item]
            for n, ing in ings:
                before[ing] -= n
            before[item] = before.get(item, 0) + y
        assert {k: v for k, v in before.items() if v} == env.inventory


# replay ----------------------------------------------------------------------


@pytest.mark.parametrize("env_id,template", [("house", "clean_place"), ("craft", "craft_multi"), ("grid", "maze")])
def test_replay_round_trip(env_id, template):
    env = fresh(env_id, 9, template)
    random_walk(env, random.Random(1), 12)
    text = dump_replay(env)
    res = replay(text)
    assert res.ok and res.events == len(env.events)


def test_replay_detects_tampering():
    env = fresh("house", 9, "pick_place")
    random_walk(env, random.Random(2), 6)
    lines = dump_replay(env).splitlines()
    lines[3] = lines[3].replace('"observation":"', '"observation":"X', 1)
    res = replay("\n".join(lines) + "\n")
    assert not res.ok and res.mismatch_at == 2


def test_replay_rejects_truncation():
    env = fresh("house", 9, "pick_place")
    text = dump_replay(env)
    with pytest.raises(ValueError):
        replay(text.splitlines()[0] + "\n")


def test_replay_with_perturbation():
    env = fresh("house", 10, "pick_place")
    env.step("look")
    obj = sorted(env.placement)[0]
    dest = next(l for l in env.holding_locations() if l != env.placement[obj])
    env.apply_perturbation(PerturbationSpec(1, ((obj, dest),)))
    env.step(f"go to {dest}")
    assert replay(dump_replay(env)).ok


# world definition files --------------------------------------------------------


def test_builtin_configs_validate():
    for env_id in ("house", "craft", "grid"):
        assert load_env_config(env_id)["env_id"] == env_id


def test_config_rejects_unknown_and_missing_keys(tmp_path):
    cfg = yaml.safe_load(yaml.safe_dump(load_env_config("house")))
    cfg["colour"] = 1
    with pytest.raises(ConfigError):
        validate(cfg)
    del cfg["colour"]
    del cfg["generation"]["max_closed"]
    with pytest.raises(ConfigError):
        validate(cfg)
    grid = yaml.safe_load(yaml.safe_dump(load_env_config("grid")))
    grid["levels"][0]["extra"] = 1
    with pytest.raises(ConfigError):
        validate(grid)
    p = tmp_path / "g.yaml"
    p.write_text(yaml.safe_dump(load_env_config("grid")))
    with pytest.raises(ConfigError):
        load_env_config("house", str(p))


def test_custom_config_is_used():
    cfg = yaml.safe_load(yaml.safe_dump(load_env_config("house")))
    cfg["generation"]["n_locations"] = [6, 6]
    env = HouseEnv(1, "pick_place", cfg)
    assert len([s for s in env.locations.values() if s["kind"] != "fixture"]) == 6
    assert isinstance(CraftEnv(1, "craft_single"), CraftEnv) and isinstance(GridEnv(1), GridEnv)
