import heapq
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapact import _kernels
from mapact.envs import GridEnv, dump_replay, replay
from mapact.envs.grid import ACTIONS, DIR_NAMES, key_cells, parse_cell

MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))


def fresh(seed):
    env = GridEnv(seed)
    env.reset()
    return env


def action_for(env, d):
    return ACTIONS[env.perm.index(d)]


def bounce_positions(length, steps):
    """Hazard track index after each step, simulated as a walker that reverses at the ends."""
    i, step, out = 0, 1, [0]
    for _ in range(steps):
        if length > 1:
            if not 0 <= i + step < length:
                step = -step
            i += step
        out.append(i)
    return out


def oracle_plan_cost(level, max_cost=64, turn=2):
    """Dijkstra over (cell, last direction, hazard phase) with a binary heap."""
    walk = level.walk
    P = level.period
    start = (level.start, 4, 0)
    dist = {start: 0}
    heap = [(0, level.start, 4, 0)]
    while heap:
        cost, cell, d, p = heapq.heappop(heap)
        if dist.get((cell, d, p), 1 << 30) < cost:
            continue
        if cell == level.target:
            return cost
        np_ = (p + 1) % P
        haz = set(level.hazard_cells(np_))
        for k, (dr, dc) in enumerate(MOVES):
            r, c = cell[0] + dr, cell[1] + dc
            if not (0 <= r < walk.shape[0] and 0 <= c < walk.shape[1] and walk[r, c]) or (r, c) in haz:
                continue
            nc = cost + (1 if d in (4, k) else turn)
            if nc <= max_cost and nc < dist.get(((r, c), k, np_), 1 << 30):
                dist[((r, c), k, np_)] = nc
                heapq.heappush(heap, (nc, (r, c), k, np_))
    return -1


@pytest.mark.parametrize("length", range(1, 9))
def test_hazard_index_matches_bouncing_walker(length):
    walk = bounce_positions(length, 60)
    assert [_kernels.hazard_index(p, length) for p in range(61)] == walk


@pytest.mark.parametrize("length", range(2, 9))
def test_hazard_period(length):
    seq = [_kernels.hazard_index(p, length) for p in range(100)]
    period = next(k for k in range(1, 100) if seq[k:] == seq[: 100 - k])
    assert period == 2 * (length - 1)


def test_level_period_is_lcm_of_tracks():
    for seed in range(10):
        env = GridEnv(seed)
        for lv in env.levels:
            for t in lv.tracks:
                assert lv.period % (2 * (len(t) - 1)) == 0
            cells = [tuple(lv.hazard_cells(p)) for p in range(2 * lv.period)]
            assert cells[: lv.period] == cells[lv.period :]


def test_hazards_start_at_track_start():
    env = GridEnv(3)
    for lv in env.levels:
        assert lv.hazard_cells(0) == [t[0] for t in lv.tracks]


@pytest.mark.parametrize("seed", range(12))
def test_plan_cost_matches_oracle(seed):
    env = GridEnv(seed)
    for lv in env.levels:
        assert lv.opt_cost == oracle_plan_cost(lv)


def test_plan_executes_to_level_completion():
    env = fresh(4)
    lv = env.level
    cells, lens = lv.hazard_arrays()
    cost, dirs = _kernels.plan_grid(lv.walk, *lv.start, *lv.target, cells, lens, lv.period, 2, 64)
    start_counter = env.counter
    for i, d in enumerate(dirs):
        obs, done, ok = env.step(action_for(env, d))
        assert not obs.error_flag
    assert env.event == "level_complete" and env.levels_completed == 1 and env.level_idx == 1
    assert not env.success and not env.done
    assert obs.text.startswith("LEVEL 2 STATE playing EVENT level_complete")
    assert env.counter == env.levels[1].counter and start_counter >= cost


def test_plan_spend_equals_cost():
    env = fresh(5)
    lv = env.level
    cells, lens = lv.hazard_arrays()
    cost, dirs = _kernels.plan_grid(lv.walk, *lv.start, *lv.target, cells, lens, lv.period, 2, 64)
    c0 = env.counter
    for d in dirs[:-1]:
        env.step(action_for(env, d))
    last = dirs[-1]
    turn = 1 if env.lastdir in (4, last) else 2
    assert c0 - env.counter + turn == cost


def test_blocked_move_consumes_counter_and_stays_put():
    env = fresh(6)
    blocked = next(d for d in range(4) if env._blocked(d))
    before, pos, phase = env.counter, env.player, env.phase
    obs, _, _ = env.step(action_for(env, blocked))
    assert obs.error_flag and env.event == "blocked"
    assert env.counter == before - 1 and env.player == pos and env.phase == phase


def test_turn_costs_two():
    env = fresh(7)
    open_dirs = [d for d in range(4) if not env._blocked(d)]
    d0 = open_dirs[0]
    c = env.counter
    env.step(action_for(env, d0))
    assert env.counter == c - 1 or env.done
    back = {0: 1, 1: 0, 2: 3, 3: 2}[d0]
    if not env.done:
        c = env.counter
        env.step(action_for(env, back))
        assert env.counter == c - 2 or env.done


@given(st.integers(0, 300), st.lists(st.sampled_from(ACTIONS + ("look",)), max_size=80))
@settings(max_examples=60, deadline=None)
def test_counter_monotone_and_exhaustion_ends_game(seed, actions):
    env = fresh(seed)
    level = env.level_idx
    prev = env.counter
    for a in actions:
        if env.done:
            break
        env.step(a)
        if env.level_idx != level:
            level, prev = env.level_idx, env.counter
            continue
        assert env.counter <= prev
        prev = env.counter
        if env.counter == 0:
            assert env.done and env.state == "game_over"


@given(st.integers(0, 300), st.lists(st.sampled_from(ACTIONS), max_size=60))
@settings(max_examples=60, deadline=None)
def test_death_exactly_on_hazard_contact(seed, actions):
    env = fresh(seed)
    for a in actions:
        if env.done:
            break
        lvl = env.level_idx
        env.step(a)
        if env.level_idx != lvl:
            continue
        on_hazard = env.player in env.level.hazard_cells(env.phase)
        assert on_hazard == (env.event == "dead")


def test_restart_level_resets_counter_and_player():
    env = fresh(8)
    open_dir = next(d for d in range(4) if not env._blocked(d))
    env.step(action_for(env, open_dir))
    obs = env.restart_level()
    assert env.player == env.level.start and env.counter == env.level.counter and env.phase == 0
    assert env.events[-1]["control"] == "restart_level"
    assert replay(dump_replay(env)).ok
    assert obs.step_index == 1


def test_frame_colours():
    env = fresh(9)
    f = env.frame()
    assert f.shape == (64, 64)
    assert f[env.player] == 9 and f[env.level.target] == 14
    assert int((f[-1] == 6).sum()) == env.counter


def test_admissible_is_look_plus_open_moves():
    env = fresh(10)
    acts = [a.text for a in env.admissible_actions()]
    assert "look" in acts
    for i, a in enumerate(ACTIONS):
        assert (a in acts) == (not env._blocked(env.perm[i]))
        assert env.clone().step(a)[0].error_flag == (a not in acts)


def test_facts_cover_layout_and_rules():
    env = fresh(11)
    gt = env.ground_truth()
    keys = gt.fact_keys()
    for cell in key_cells(env.level.walk):
        assert ("spatial", f"{cell[0]},{cell[1]}", "reachable", "true") in keys
    for i, a in enumerate(ACTIONS):
        assert ("affordance", a, "moves", DIR_NAMES[env.perm[i]]) in keys
    assert len(gt.of_kind("rule")) == 8


def test_target_relocation():
    env = fresh(12)
    env.step("look")
    cands = [c for c in key_cells(env.level.walk) if c not in (env.level.target, env.player)]
    from mapact.envs import PerturbationSpec

    dest = f"{cands[0][0]},{cands[0][1]}"
    env.apply_perturbation(PerturbationSpec(1, (("target", dest),)))
    assert env.level.target == parse_cell(dest)


@pytest.mark.skipif(_kernels.compiled_backend is None, reason="compiled kernels not built")
def test_compiled_and_python_planners_agree():
    for seed in range(8):
        for lv in GridEnv(seed).levels:
            cells, lens = lv.hazard_arrays()
            args = (lv.walk, *lv.start, *lv.target, cells, lens, lv.period, 2, 64)
            a = _kernels.compiled_backend.plan_grid(*args)
            b = _kernels.python_backend.plan_grid(*args)
            assert a[0] == b[0] and list(a[1]) == list(b[1])


def test_plan_unreachable():
    walk = np.zeros((5, 5), np.uint8)
    walk[0, 0] = walk[4, 4] = 1
    cost, dirs = _kernels.plan_grid(walk, 0, 0, 4, 4, np.zeros((0, 1, 2), np.int32), np.zeros(0, np.int32), 1, 2, 64)
    assert cost == -1 and list(dirs) == []


def test_random_seeds_generate():
    rng = random.Random(0)
    for _ in range(10):
        env = GridEnv(rng.randrange(2**32))
        assert len(env.levels) == 3 and all(lv.counter >= lv.opt_cost for lv in env.levels)
