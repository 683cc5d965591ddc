from collections import deque

import pytest

import mapact.executor as ex
from mapact.core import Action, Observation, StepRecord, Trajectory, Instruction
from mapact.envs import make, template_for
from mapact.executor import (
    DEFAULT_BUDGETS,
    ExecutorConfig,
    default_params,
    detect_reexploration,
    filter_map,
    run_comap_episode,
    run_episode,
    run_pipeline,
)
from mapact.mapping import run_stage2
from mapact.policy import render_prompt


def shortest_plan(env, limit=14):
    """Fewest actions to success by breadth-first search over cloned worlds.

    Observation and close commands never help, so they are skipped.
    """
    if env.success:
        return 0
    seen = {env.state_key()}
    frontier = deque([(env, 0)])
    while frontier:
        cur, d = frontier.popleft()
        if d >= limit:
            continue
        for a in cur.admissible_actions():
            if a.kind == "observe" or a.text.startswith("close "):
                continue
            nxt = cur.clone()
            nxt.step(a.text)
            if nxt.success:
                return d + 1
            k = nxt.state_key()
            if k not in seen:
                seen.add(k)
                frontier.append((nxt, d + 1))
    return None


@pytest.mark.parametrize("family,seeds", [("house", range(12)), ("science", range(12))])
def test_map_actor_matches_shortest_plan(kg, family, seeds):
    """After mapping, the oracle actor needs exactly as many acting steps as an exhaustive search."""
    for seed in seeds:
        t = template_for(family, seed)
        env = make("house", seed, t)
        ins, _ = env.reset()
        m, _ = DEFAULT_BUDGETS[family]
        res = run_stage2(ins, env, kg(family), params=default_params(family), step_budget=m)
        best = shortest_plan(env.clone())
        _, report = run_episode(ins, env, kg(family), res.cognitive_map, config=ExecutorConfig("map", 50), mapping=res.trajectory)
        assert report.success
        assert report.acting_steps == best, (seed, t)


def test_config_validation():
    with pytest.raises(ValueError):
        ExecutorConfig("plan")
    with pytest.raises(ValueError):
        ExecutorConfig(acting_budget=-1)
    with pytest.raises(ValueError):
        ExecutorConfig(drop_map_component="rules")
    with pytest.raises(ValueError):
        ExecutorConfig("react", ablate_stage1=True)
    with pytest.raises(ValueError):
        ExecutorConfig(ablate_stage2=True, drop_map_component="spatial")
    assert ExecutorConfig(ablate_stage1=True, ablate_stage2=True).omitted == {"knowledge", "map"}


def test_react_refuses_map_inputs(kg):
    env = make("house", 1, "pick_place")
    ins, _ = env.reset()
    with pytest.raises(ValueError):
        run_episode(ins, env, kg("house"), None, config=ExecutorConfig("react"))
    with pytest.raises(ValueError):
        run_episode(ins, env, None, None, config=ExecutorConfig("map"))
    with pytest.raises(ValueError):
        run_episode(ins, env, None, None, config=ExecutorConfig("comap"))


def test_react_uses_more_acting_steps(kg):
    m = r = 0
    for seed in range(20):
        m += run_pipeline("house", seed, "map", kg("house")).report.acting_steps
        r += run_pipeline("house", seed, "react").report.acting_steps
    assert r > m


def test_report_accounting(kg):
    res = run_pipeline("craft", 3, "map", kg("craft"))
    rep = res.report
    assert rep.mapping_steps == len(res.mapping) and rep.acting_steps == len(res.acting)
    assert rep.tokens_total == res.mapping.tokens() + res.acting.tokens()
    assert rep.rollout_length == rep.acting_steps and rep.success


def test_comap_budget_zero():
    env = make("house", 2, "pick_place")
    ins, _ = env.reset()
    traj, cmap, rep = run_comap_episode(ins, env, budget=0)
    assert len(traj) == 0 and not rep.success and rep.notes == ("empty budget",)
    assert cmap.entry_count > 0


def test_comap_and_react_budgets_are_totals():
    for paradigm in ("react", "comap"):
        res = run_pipeline("house", 5, paradigm, budgets=(1, 1))
        assert res.report.acting_steps <= 2


def test_drop_spatial_removes_spatial_and_negative(kg):
    res = run_pipeline("house", 4, "map", kg("house"))
    kept = filter_map(res.cognitive_map, "spatial")
    assert {e.kind for e in kept.entries} <= {"affordance", "rule"}
    assert filter_map(res.cognitive_map, None) is res.cognitive_map
    dropped = run_pipeline("house", 4, "map", kg("house"), drop_map_component="spatial")
    assert dropped.report.acting_steps >= res.report.acting_steps
    assert dropped.report.notes == ("drop_spatial",)


def test_ablate_stage2_prompt_shows_knowledge_not_map(kg, monkeypatch):
    prompts = []
    real = ex.decide

    def spy(ctx, backend=None, handle=None):
        prompts.append(render_prompt(ctx))
        return real(ctx, backend, handle)

    monkeypatch.setattr(ex, "decide", spy)
    res = run_pipeline("house", 6, "map", kg("house"), ablate_stage2=True)
    assert res.mapping is None and res.report.mapping_steps == 0
    assert prompts and all("[Global Knowledge]" in p and "[Cognitive Map]" not in p for p in prompts)


def test_ablate_stage1_prompt_has_map_only(kg, monkeypatch):
    prompts = []
    real = ex.decide

    def spy(ctx, backend=None, handle=None):
        prompts.append(render_prompt(ctx))
        return real(ctx, backend, handle)

    monkeypatch.setattr(ex, "decide", spy)
    run_pipeline("house", 6, "map", None, ablate_stage1=True)
    assert prompts and all("[Global Knowledge]" not in p and "[Cognitive Map]" in p for p in prompts)


def test_grid_acting_restarts_level(kg):
    res = run_pipeline("grid", 3, "map", kg("grid"))
    events = [e for e in make_events(res.replay) if e.get("control") == "restart_level"]
    assert len(events) == 1
    assert res.report.success == (res.report.max_level == 3)


def make_events(replay_text):
    import json

    return [json.loads(line) for line in replay_text.splitlines()[1:-1]]


def test_pipeline_deterministic(kg):
    a = run_pipeline("house", 8, "map", kg("house"))
    b = run_pipeline("house", 8, "map", kg("house"))
    assert a.report == b.report and a.replay == b.replay and a.acting == b.acting


# re-exploration ------------------------------------------------------------------

INS = Instruction("put some apple on desk 1", "house", "t", 1)


def traj_of(*cmds):
    steps = []
    for i, c in enumerate(cmds, 1):
        kind = "navigate" if c.startswith("go to ") else "interact"
        steps.append(StepRecord(Action(c, kind), Observation.make("ok", i), "act"))
    return Trajectory("t", INS, tuple(steps))


def test_reexploration_detected():
    t = traj_of("go to shelf 1", "take apple 1 from shelf 1", "go to drawer 1")
    assert detect_reexploration(t, 1)
    assert detect_reexploration(t, 1, {"shelf 1"})
    assert not detect_reexploration(t, 1, {"drawer 1"})


def test_reexploration_only_stale_visits():
    t = traj_of("go to shelf 1", "look", "go to shelf 1")
    assert not detect_reexploration(t, 1)
    with pytest.raises(ValueError):
        detect_reexploration(t, 4)
