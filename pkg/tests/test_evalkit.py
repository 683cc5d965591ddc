import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mapact.core import CognitiveMap, EpisodeReport, Instruction
from mapact.envs import make
from mapact.evalkit import (
    CATEGORIES,
    STATS_COLUMNS,
    ExportError,
    PerturbationConfig,
    Thresholds,
    alignment_of,
    answer_qa_from_map,
    compute_metrics,
    delta_steps_of,
    export_dataset,
    format_summary,
    format_stats,
    generate_qa,
    make_record,
    plan_perturbation,
    read_dataset,
    revalidate,
    dataset_stats,
)
from mapact.executor import run_pipeline
from mapact.mapping import StoppingParams, run_stage2

INS = Instruction("x", "house", "t", 0)


def rep(ok, acting=4, mapping=2, t_perturb=None, reexplored=None):
    return EpisodeReport(INS, ok, mapping, acting, 100, acting, t_perturb, reexplored, tokens_map=40, tokens_act=60)


# metrics -----------------------------------------------------------------------


def test_pass_at_one_example():
    assert compute_metrics([rep(True), rep(False), rep(True), rep(True)]).pass_at_1 == 0.75


def test_delta_steps_example():
    assert delta_steps_of(rep(True, acting=10, t_perturb=3)) == 6
    with pytest.raises(ValueError):
        delta_steps_of(rep(True))


def test_perturbation_summary():
    m = compute_metrics([rep(True, 10, t_perturb=3, reexplored=True), rep(False, 8, t_perturb=1, reexplored=False), rep(True)])
    assert m.n_perturbed == 2 and m.pass_at_1_perturb == 0.5 and m.reexplore_rate == 0.5
    assert m.delta_steps == (6 + 6) / 2
    assert "0.500" in format_summary("x", m)


def test_no_reports():
    with pytest.raises(ValueError):
        compute_metrics([])


@given(st.lists(st.tuples(st.booleans(), st.integers(0, 50), st.integers(0, 20)), min_size=1, max_size=20), st.randoms())
def test_metrics_order_independent(rows, rnd):
    reports = [rep(ok, a, m) for ok, a, m in rows]
    shuffled = list(reports)
    rnd.shuffle(shuffled)
    assert compute_metrics(reports) == compute_metrics(shuffled)


# QA ----------------------------------------------------------------------------


def mapped(kg, family, env_id, seed, template):
    env = make(env_id, seed, template)
    ins, _ = env.reset()
    res = run_stage2(ins, env, kg(family), params=StoppingParams(T_min=40, T_max=40))
    return env, res.cognitive_map


def test_qa_full_map_answers_everything(kg):
    env, cmap = mapped(kg, "house", "house", 3, "pick_place")
    items = generate_qa(env.ground_truth(), cmap.env_id)
    acc = answer_qa_from_map(cmap, items).accuracy()
    assert all(acc[c] == 1.0 for c in CATEGORIES)


def test_qa_empty_map_scores_zero(kg):
    env, _ = mapped(kg, "craft", "craft", 3, "craft_multi")
    items = generate_qa(env.ground_truth())
    res = answer_qa_from_map(CognitiveMap("craft"), items)
    assert all(v == 0.0 for v in res.accuracy().values() if v is not None)
    assert all(i.predicted == "unknown" for i in res.items)


def test_qa_counts_match_fact_kinds(kg):
    env, _ = mapped(kg, "house", "house", 5, "clean_place")
    snap = env.ground_truth()
    counts = {c: sum(i.category == c for i in generate_qa(snap)) for c in CATEGORIES}
    at = [f for f in snap.facts if f.kind == "spatial" and f.relation == "at" and f.object != "inventory"]
    aff = [f for f in snap.facts if f.kind == "affordance" and f.relation != "state"]
    assert counts == {"object_location": len(at), "affordance": len(aff), "negative": len(snap.of_kind("negative")), "task_reasoning": 1}


def test_qa_env_mismatch():
    env = make("house", 1, "pick_place")
    with pytest.raises(ValueError):
        generate_qa(env.ground_truth(), "grid")


def test_qa_stale_map_answers_wrong_location(kg):
    env, cmap = mapped(kg, "house", "house", 7, "pick_place")
    obj = sorted(env.placement)[0]
    dest = next(l for l in env.holding_locations() if l != env.placement[obj])
    env.placement[obj] = dest
    items = [i for i in generate_qa(env.ground_truth()) if i.key == (obj,)]
    assert not answer_qa_from_map(cmap, items).items[0].correct


# perturbation ------------------------------------------------------------------


def test_perturbation_plan_deterministic():
    a, b = plan_perturbation(11), plan_perturbation(11)
    assert a[0] == b[0] and 1 <= a[0] <= 3
    ea = make("house", 11, "pick_place")
    eb = make("house", 11, "pick_place")
    ea.reset(), eb.reset()
    ea.step("look"), eb.step("look")
    assert a[1](ea) == b[1](eb)


def test_perturbation_probability_zero():
    assert all(plan_perturbation(s, PerturbationConfig(probability=0.0)) is None for s in range(20))


def test_perturbation_config_validation():
    for bad in (dict(probability=1.5), dict(step_range=(0, 2)), dict(step_range=(3, 2)), dict(max_objects=0)):
        with pytest.raises(ValueError):
            PerturbationConfig(**bad)


def test_house_moves_relocate_task_objects():
    for seed in range(20):
        env = make("house", seed, "pick_place")
        env.reset()
        env.step("look")
        spec, moves = plan_perturbation(seed)[1](env)
        for obj, dest, src in moves:
            assert obj.startswith(env.target_cls + " ") and dest not in (src, env.dest)
        assert spec.trigger_step == 1


# export ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def runs(kg):
    return [run_pipeline(f, s, "map", kg(f)) for f in ("house", "craft") for s in range(4)]


def test_export_keeps_aligned_runs(runs, tmp_path):
    path = tmp_path / "ds.jsonl"
    res = export_dataset(runs, path)
    head, records = read_dataset(path)
    assert res.n_runs == 8 and res.n_kept == len(records) == head["records"]
    for r in records:
        assert r["alignment"]["spatial_coverage"] >= 0.8 and r["alignment"]["factual_accuracy"] >= 0.95
    again = revalidate(path)
    assert [(a.spatial_coverage, a.factual_accuracy) for a in again] == [
        (r["alignment"]["spatial_coverage"], r["alignment"]["factual_accuracy"]) for r in records
    ]


def test_export_stats_recount(runs, tmp_path):
    path = tmp_path / "ds.jsonl"
    res = export_dataset(runs, path)
    _, records = read_dataset(path)
    for fam in ("house", "craft"):
        rs = [r for r in records if r["family"] == fam]
        steps = sum(len(r["mapping_trajectory"]["steps"]) + len(r["execution_trajectory"]["steps"]) for r in rs)
        tokens = sum(
            s["tokens_in"] + s["tokens_out"] for r in rs for t in ("mapping_trajectory", "execution_trajectory") for s in r[t]["steps"]
        )
        row = res.stats[fam]
        assert row["# Traj."] == len(rs)
        assert row["Avg. Steps"] == pytest.approx(steps / len(rs))
        assert row["Avg. Tokens(k)"] == pytest.approx(tokens / len(rs) / 1000)
    assert format_stats(res.stats).splitlines()[0] == " | ".join(STATS_COLUMNS)


def test_export_filter_is_per_run(runs, tmp_path):
    als = [make_record(r)["alignment"] for r in runs]
    cut = sorted(a["spatial_coverage"] for a in als)[len(als) // 2]
    res = export_dataset(runs, tmp_path / "ds.jsonl", Thresholds(cut, 0.0))
    assert res.n_kept == sum(a["spatial_coverage"] >= cut for a in als)
    none = export_dataset(runs, tmp_path / "none.jsonl", Thresholds(1.0, 1.0))
    assert none.n_kept == sum(a["spatial_coverage"] == 1.0 and a["factual_accuracy"] == 1.0 for a in als)


def test_export_empty(tmp_path):
    res = export_dataset([], tmp_path / "empty.jsonl")
    head, records = read_dataset(tmp_path / "empty.jsonl")
    assert head["records"] == 0 and records == []
    assert res.stats == {"Total": {"# Traj.": 0, "Avg. Steps": 0.0, "Avg. Tokens(k)": 0.0}}


def test_export_errors(runs, tmp_path, kg):
    react = run_pipeline("house", 1, "react")
    with pytest.raises(ExportError):
        make_record(react)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ExportError):
        export_dataset(runs[:1], blocker / "sub" / "ds.jsonl")
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps({"format": "other", "version": 1}) + "\n")
    with pytest.raises(ExportError):
        read_dataset(bad)
    with pytest.raises(ValueError):
        Thresholds(1.2, 0.5)


def test_alignment_empty_map_scores_zero_accuracy():
    env = make("house", 2, "pick_place")
    al = alignment_of(CognitiveMap("house"), env.ground_truth([]))
    assert al.factual_accuracy == 0.0


def test_stats_row_ordering():
    rows = [{"family": f, "steps": 10, "tokens": 2000} for f in ("craft", "house", "house")]
    stats = dataset_stats(rows)
    assert list(stats) == ["house", "craft", "Total"]
    assert stats["Total"]["# Traj."] == 3 and stats["house"]["Avg. Tokens(k)"] == 2.0
