"""Command-line entry point: ``mapact <command> [--config run.yaml] [overrides]``.

Every command reads one declarative run configuration (YAML, unknown keys are
errors), applies command-line overrides, writes its outputs under
``output_dir/<command>/`` and records them in ``output_dir/manifest.json``.
Episodes run in a process pool when ``--workers`` > 1; results are merged in
seed order, so outputs do not depend on the worker count.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Optional

import yaml

from .core import GlobalKnowledge, ParseError, deserialize, serialize, write_records
from .envs import FAMILIES, make, replay, template_for
from .evalkit import (
    CATEGORIES,
    PerturbationConfig,
    Thresholds,
    answer_qa_from_map,
    compute_metrics,
    export_dataset,
    format_summary,
    format_stats,
    generate_qa,
    plan_perturbation,
)
from .evalkit.metrics import PERTURB_HEADER, SUMMARY_HEADER
from .executor import DEFAULT_BUDGETS, MAP_COMPONENTS, PARADIGMS, default_params, run_pipeline
from .mapping import StoppingParams, run_stage1, run_stage2, trace_to_tsv
from .policy import BackendConfig

log = logging.getLogger("mapact")

COMMANDS = ("stage1", "bench", "perturb", "qa", "export", "sweep", "replay")
DEFAULT_SWEEP = (2, 5, 10, 15)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# run configuration

_BACKEND_KEYS = {f for f in BackendConfig.__dataclass_fields__}
_STOPPING_KEYS = {f for f in StoppingParams.__dataclass_fields__}
_SCHEMA = {
    "env_id": None,
    "seeds": None,
    "train_seeds": None,
    "backend": _BACKEND_KEYS,
    "stopping": _STOPPING_KEYS,
    "budgets": {"mapping", "acting"},
    "paradigm": None,
    "ablations": {"stage1", "stage2", "drop_map_component"},
    "perturbation": {"probability", "step_range", "max_objects"},
    "output_dir": None,
    "knowledge_path": None,
    "thresholds": {"coverage_min", "accuracy_min"},
    "sweep_budgets": None,
    "templates": None,
    "stage1_budget": None,
    "workers": None,
}


def parse_seeds(value) -> tuple[int, ...]:
    """Seeds from a list, ``{start, stop}`` (stop exclusive), ``"a:b"`` or ``"1,2,3"``."""
    if value is None:
        return ()
    if isinstance(value, int) and not isinstance(value, bool):
        return (value,)
    if isinstance(value, dict):
        extra = set(value) - {"start", "stop"}
        if extra or "stop" not in value:
            raise ConfigError("a seed range needs 'stop' and optionally 'start'")
        return tuple(range(int(value.get("start", 0)), int(value["stop"])))
    if isinstance(value, str):
        value = value.strip()
        if ":" in value:
            lo, hi = value.split(":", 1)
            return tuple(range(int(lo), int(hi)))
        return tuple(int(x) for x in value.split(",") if x.strip())
    if isinstance(value, (list, tuple)):
        return tuple(int(x) for x in value)
    raise ConfigError(f"cannot read seeds from {value!r}")


@dataclass(frozen=True)
class RunConfig:
    # task family: house, science, craft or grid
    env_id: str = "house"
    seeds: tuple[int, ...] = ()
    train_seeds: tuple[int, ...] = ()
    backend: BackendConfig = BackendConfig()
    stopping: Optional[StoppingParams] = None
    budgets: Optional[tuple[int, int]] = None
    paradigm: str = "map"
    ablate_stage1: bool = False
    ablate_stage2: bool = False
    drop_map_component: Optional[str] = None
    perturbation: Optional[PerturbationConfig] = None
    output_dir: str = "runs"
    knowledge_path: str = ""
    thresholds: Thresholds = Thresholds()
    sweep_budgets: tuple[int, ...] = DEFAULT_SWEEP
    templates: tuple[str, ...] = ()
    stage1_budget: int = 40
    workers: int = 1

    def __post_init__(self):
        if self.env_id not in FAMILIES:
            raise ConfigError(f"unknown env_id {self.env_id!r}; choose from {sorted(FAMILIES)}")
        if self.paradigm not in PARADIGMS:
            raise ConfigError(f"unknown paradigm {self.paradigm!r}")
        if self.drop_map_component is not None and self.drop_map_component not in MAP_COMPONENTS:
            raise ConfigError(f"drop_map_component must be one of {MAP_COMPONENTS}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.budgets is not None and (self.budgets[0] < 1 or self.budgets[1] < 0):
            raise ConfigError("budgets need mapping >= 1 and acting >= 0")
        bad = [t for t in self.templates if t not in FAMILIES[self.env_id][1]]
        if bad:
            raise ConfigError(f"templates {bad} do not belong to {self.env_id}")

    @property
    def mapping_budget(self) -> int:
        return (self.budgets or DEFAULT_BUDGETS[self.env_id])[0]

    @property
    def acting_budget(self) -> int:
        return (self.budgets or DEFAULT_BUDGETS[self.env_id])[1]

    @property
    def params(self) -> StoppingParams:
        return self.stopping or default_params(self.env_id)

    @property
    def kg_path(self) -> str:
        return self.knowledge_path or os.path.join(self.output_dir, f"knowledge_{self.env_id}.json")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["budgets"] = {"mapping": self.mapping_budget, "acting": self.acting_budget}
        d["stopping"] = asdict(self.params)
        return d


def _section(raw: dict, name: str) -> dict:
    sub = raw.get(name) or {}
    if not isinstance(sub, dict):
        raise ConfigError(f"'{name}' must be a mapping")
    unknown = set(sub) - _SCHEMA[name]
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {sorted(unknown)}")
    return sub


def config_from_dict(raw: dict) -> RunConfig:
    """Strict conversion of a parsed YAML document."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("a run configuration must be a mapping")
    unknown = set(raw) - set(_SCHEMA)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    kw: dict = {}
    for key in ("env_id", "paradigm", "output_dir", "knowledge_path"):
        if key in raw:
            kw[key] = str(raw[key])
    for key in ("stage1_budget", "workers"):
        if key in raw:
            kw[key] = int(raw[key])
    if "seeds" in raw:
        kw["seeds"] = parse_seeds(raw["seeds"])
    if "train_seeds" in raw:
        kw["train_seeds"] = parse_seeds(raw["train_seeds"])
    if "sweep_budgets" in raw:
        kw["sweep_budgets"] = parse_seeds(raw["sweep_budgets"])
    if "templates" in raw:
        kw["templates"] = tuple(raw["templates"] or ())
    try:
        if "backend" in raw:
            kw["backend"] = BackendConfig(**_section(raw, "backend"))
        if "stopping" in raw:
            family = kw.get("env_id", "house")
            base = asdict(default_params(family)) if family in FAMILIES else {}
            kw["stopping"] = StoppingParams(**{**base, **_section(raw, "stopping")})
        if "budgets" in raw:
            b = _section(raw, "budgets")
            family = kw.get("env_id", "house")
            m, a = DEFAULT_BUDGETS.get(family, (10, 50))
            kw["budgets"] = (int(b.get("mapping", m)), int(b.get("acting", a)))
        if "ablations" in raw:
            ab = _section(raw, "ablations")
            kw["ablate_stage1"] = bool(ab.get("stage1", False))
            kw["ablate_stage2"] = bool(ab.get("stage2", False))
            kw["drop_map_component"] = ab.get("drop_map_component")
        if raw.get("perturbation") is not None:
            kw["perturbation"] = PerturbationConfig(**_section(raw, "perturbation"))
        if "thresholds" in raw:
            kw["thresholds"] = Thresholds(**_section(raw, "thresholds"))
        return RunConfig(**kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: Optional[str]) -> RunConfig:
    if not path:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            return config_from_dict(yaml.safe_load(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None


def apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Command-line flags win over the file."""
    kw: dict = {}
    for key in ("env_id", "paradigm", "output_dir", "knowledge_path", "workers", "stage1_budget"):
        v = getattr(args, key, None)
        if v is not None:
            kw[key] = v
    if getattr(args, "seeds", None) is not None:
        kw["seeds"] = parse_seeds(args.seeds)
    if getattr(args, "train_seeds", None) is not None:
        kw["train_seeds"] = parse_seeds(args.train_seeds)
    if getattr(args, "budgets", None) is not None:
        kw["sweep_budgets"] = parse_seeds(args.budgets)
    family = kw.get("env_id", cfg.env_id)
    if args.mapping_budget is not None or args.acting_budget is not None:
        m, a = cfg.budgets or DEFAULT_BUDGETS.get(family, (10, 50))
        kw["budgets"] = (args.mapping_budget or m, a if args.acting_budget is None else args.acting_budget)
    for flag in args.ablate or ():
        if flag == "stage1":
            kw["ablate_stage1"] = True
        elif flag == "stage2":
            kw["ablate_stage2"] = True
        else:
            kw["drop_map_component"] = flag
    backend = {}
    for flag, key in (("backend", "kind"), ("endpoint", "endpoint"), ("model", "model_name"), ("transcript", "transcript")):
        v = getattr(args, flag, None)
        if v is not None:
            backend[key] = v
    try:
        if backend:
            kw["backend"] = replace(cfg.backend, **backend)
        if args.perturb_prob is not None or args.perturb_steps is not None:
            base = cfg.perturbation or PerturbationConfig()
            steps = tuple(int(x) for x in args.perturb_steps.split(":")) if args.perturb_steps else base.step_range
            prob = base.probability if args.perturb_prob is None else args.perturb_prob
            kw["perturbation"] = PerturbationConfig(prob, steps, base.max_objects)
        if args.coverage_min is not None or args.accuracy_min is not None:
            t = cfg.thresholds
            kw["thresholds"] = Thresholds(
                t.coverage_min if args.coverage_min is None else args.coverage_min,
                t.accuracy_min if args.accuracy_min is None else args.accuracy_min,
            )
        return replace(cfg, **kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# output plumbing


def _outdir(cfg: RunConfig, command: str) -> str:
    d = os.path.join(cfg.output_dir, command)
    os.makedirs(d, exist_ok=True)
    return d


def _write_text(path: str, text: str) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def update_manifest(cfg: RunConfig, command: str, files: list[str], extra: Optional[dict] = None) -> str:
    """Record one command's configuration and outputs (with checksums) in the manifest."""
    path = os.path.join(cfg.output_dir, "manifest.json")
    manifest = {"format": "mapact/manifest", "version": 1, "commands": {}}
    if os.path.exists(path):
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    entry = {
        "config": cfg.as_dict(),
        "outputs": {os.path.relpath(f, cfg.output_dir): _sha256(f) for f in sorted(files)},
    }
    if extra:
        entry.update(extra)
    manifest["commands"][command] = entry
    os.makedirs(cfg.output_dir, exist_ok=True)
    _write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_knowledge(cfg: RunConfig) -> Optional[GlobalKnowledge]:
    """The family's K_g when the configuration needs one; errors point to stage1."""
    needs = cfg.paradigm == "map" and not cfg.ablate_stage1
    path = cfg.kg_path
    if not os.path.exists(path):
        if needs:
            raise ConfigError(f"global knowledge {path} not found; run `mapact stage1` for {cfg.env_id} first")
        return None
    with open(path, "rb") as fh:
        kg = deserialize(fh.read())
    if not isinstance(kg, GlobalKnowledge) or kg.env_id != FAMILIES[cfg.env_id][0]:
        raise ConfigError(f"{path} does not hold global knowledge for {cfg.env_id}")
    return kg if needs else None


# ---------------------------------------------------------------------------
# episode workers (top level so the process pool can pickle them)


def _episode(job: tuple):
    cfg, seed, knowledge, budgets, perturb = job
    pert = plan_perturbation(seed, perturb) if perturb is not None else None
    return run_pipeline(
        cfg.env_id,
        seed,
        cfg.paradigm,
        knowledge,
        cfg.backend,
        budgets,
        cfg.params,
        cfg.ablate_stage1,
        cfg.ablate_stage2,
        cfg.drop_map_component,
        pert,
        cfg.templates or None,
    )


def _qa_episode(job: tuple):
    cfg, seed, knowledge = job
    family = cfg.env_id
    env = make(FAMILIES[family][0], seed, template_for(family, seed, cfg.templates or None))
    instruction, opening = env.reset()
    # full budget: the map is scored on what exploration can reach
    params = cfg.params
    res = run_stage2(instruction, env, knowledge, cfg.backend, params, params.T_max, opening)
    items = generate_qa(env.ground_truth(), instruction.env_id)
    return seed, answer_qa_from_map(res.cognitive_map, items)


def run_jobs(fn, jobs: list, workers: int) -> list:
    """Apply ``fn`` to every job; results come back in job order whatever the worker count."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def _require_seeds(cfg: RunConfig) -> tuple[int, ...]:
    if not cfg.seeds:
        raise ConfigError("no evaluation seeds configured (set 'seeds' or pass --seeds)")
    return tuple(sorted(set(cfg.seeds)))


def _label(cfg: RunConfig) -> str:
    parts = [cfg.env_id, cfg.paradigm]
    if cfg.ablate_stage1:
        parts.append("w/o-stage1")
    if cfg.ablate_stage2:
        parts.append("w/o-stage2")
    if cfg.drop_map_component:
        parts.append(f"w/o-{cfg.drop_map_component}")
    return "/".join(parts)


def _write_episodes(cfg: RunConfig, d: str, seeds, results) -> list[str]:
    files = []
    reports = [r.report for r in results]
    p = os.path.join(d, "reports.jsonl")
    write_records(p, reports)
    files.append(p)
    trajs = []
    for r in results:
        if r.mapping is not None:
            trajs.append(r.mapping)
        trajs.append(r.acting)
    p = os.path.join(d, "trajectories.jsonl")
    write_records(p, trajs)
    files.append(p)
    for seed, r in zip(seeds, results):
        if r.trace is not None:
            os.makedirs(os.path.join(d, "traces"), exist_ok=True)
            files.append(_write_text(os.path.join(d, "traces", f"{cfg.env_id}_{seed}.tsv"), trace_to_tsv(r.trace)))
        os.makedirs(os.path.join(d, "replays"), exist_ok=True)
        files.append(_write_text(os.path.join(d, "replays", f"{cfg.env_id}_{seed}.jsonl"), r.replay))
    return files


def _summarize(cfg: RunConfig, d: str, reports) -> tuple[list[str], dict]:
    m = compute_metrics(reports)
    header = list(SUMMARY_HEADER) + (list(PERTURB_HEADER) if m.n_perturbed else [])
    table = " | ".join(header) + "\n" + format_summary(_label(cfg), m) + "\n"
    print(table, end="")
    files = [
        _write_text(os.path.join(d, "summary.json"), json.dumps(m.as_dict(), indent=2, sort_keys=True) + "\n"),
        _write_text(os.path.join(d, "summary.txt"), table),
    ]
    return files, m.as_dict()


def _episodes(cfg: RunConfig, command: str, perturb: Optional[PerturbationConfig], budgets=None):
    seeds = _require_seeds(cfg)
    knowledge = load_knowledge(cfg)
    budgets = budgets or (cfg.mapping_budget, cfg.acting_budget)
    jobs = [(cfg, s, knowledge, budgets, perturb) for s in seeds]
    return seeds, run_jobs(_episode, jobs, cfg.workers)


# ---------------------------------------------------------------------------
# commands


def cmd_stage1(cfg: RunConfig) -> str:
    """Explore the training seeds, distill K_g and persist it. Returns the K_g path."""
    train = tuple(cfg.train_seeds)
    if not train:
        raise ConfigError("stage1 needs training seeds (set 'train_seeds' or pass --train-seeds)")
    overlap = sorted(set(train) & set(cfg.seeds))
    if overlap:
        raise ConfigError(f"training seeds overlap evaluation seeds {overlap[:10]}; Stage 1 must not see test instances")
    res = run_stage1(cfg.env_id, train, cfg.backend, budget=cfg.stage1_budget)
    d = _outdir(cfg, "stage1")
    path = cfg.kg_path
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(serialize(res.knowledge))
    traj_path = os.path.join(d, f"trajectories_{cfg.env_id}.jsonl")
    write_records(traj_path, res.trajectories)
    fp = _write_text(
        os.path.join(d, f"focus_points_{cfg.env_id}.txt"),
        "".join(f"Reasoning {i}: {r}\nFocus Point {i}: {p}\n" for i, (r, p) in enumerate(res.focus_points, 1)),
    )
    print(f"global knowledge for {cfg.env_id}: {res.knowledge.rule_count} rules from {len(train)} training instances")
    for section in ("action_syntax", "interaction_rules", "error_patterns"):
        for rule in getattr(res.knowledge, section):
            print(f"  [{section}] {rule.statement} ({len(rule.evidence)} steps of evidence)")
    update_manifest(cfg, "stage1", [path, traj_path, fp])
    return path


def cmd_bench(cfg: RunConfig, command: str = "bench", perturb: Optional[PerturbationConfig] = None) -> dict:
    perturb = perturb if perturb is not None else cfg.perturbation
    seeds, results = _episodes(cfg, command, perturb)
    d = _outdir(cfg, command)
    files = _write_episodes(cfg, d, seeds, results)
    more, summary = _summarize(cfg, d, [r.report for r in results])
    update_manifest(cfg, command, files + more, {"summary": summary})
    return summary


def cmd_perturb(cfg: RunConfig) -> dict:
    return cmd_bench(cfg, "perturb", cfg.perturbation or PerturbationConfig())


def cmd_qa(cfg: RunConfig) -> dict:
    seeds = _require_seeds(cfg)
    knowledge = load_knowledge(replace(cfg, paradigm="map"))
    out = run_jobs(_qa_episode, [(cfg, s, knowledge) for s in seeds], cfg.workers)
    d = _outdir(cfg, "qa")
    rows = []
    totals = {c: [0, 0] for c in CATEGORIES}
    for seed, res in out:
        for item in res.items:
            totals[item.category][0] += item.correct
            totals[item.category][1] += 1
            rows.append({"seed": seed, "category": item.category, "question": item.question, "gold": item.gold, "predicted": item.predicted})
    acc = {c: (ok / n if n else None) for c, (ok, n) in totals.items()}
    items_path = os.path.join(d, "items.jsonl")
    _write_text(items_path, "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
    lines = ["category | questions | accuracy"]
    for c in CATEGORIES:
        a = acc[c]
        lines.append(f"{c} | {totals[c][1]} | {'n/a' if a is None else f'{a:.3f}'}")
    table = "\n".join(lines) + "\n"
    print(table, end="")
    acc_path = _write_text(os.path.join(d, "accuracy.json"), json.dumps({"accuracy": acc, "counts": {c: totals[c][1] for c in CATEGORIES}}, indent=2) + "\n")
    txt = _write_text(os.path.join(d, "accuracy.txt"), table)
    update_manifest(cfg, "qa", [items_path, acc_path, txt], {"accuracy": acc})
    return acc


def cmd_export(cfg: RunConfig) -> dict:
    if cfg.paradigm != "map" or cfg.ablate_stage2:
        raise ConfigError("export needs map-paradigm runs with a mapping phase")
    seeds, results = _episodes(cfg, "export", None)
    d = _outdir(cfg, "export")
    settings = {k: v for k, v in asdict(cfg.backend).items() if k in ("kind", "endpoint", "model_name", "temperature", "max_tokens")}
    ref = cfg.kg_path if not cfg.ablate_stage1 else ""
    res = export_dataset(results, os.path.join(d, "dataset.jsonl"), cfg.thresholds, ref, settings)
    table = format_stats(res.stats) + "\n"
    print(f"kept {res.n_kept} of {res.n_runs} runs")
    print(table, end="")
    files = [
        res.path,
        _write_text(os.path.join(d, "stats.json"), json.dumps(res.stats, indent=2) + "\n"),
        _write_text(os.path.join(d, "stats.txt"), table),
    ]
    update_manifest(cfg, "export", files, {"kept": res.n_kept, "runs": res.n_runs})
    return res.stats


def cmd_sweep(cfg: RunConfig, budgets=None) -> dict:
    """Rerun Stage 2 + 3 per mapping budget; pass@1 and turns per budget."""
    if cfg.paradigm != "map" or cfg.ablate_stage2:
        raise ConfigError("the budget sweep varies the mapping phase; use the map paradigm")
    budgets = tuple(budgets or cfg.sweep_budgets)
    if not budgets:
        raise ConfigError("no sweep budgets given")
    cap = cfg.params.T_max
    if max(budgets) > cap:
        raise ConfigError(f"sweep budget {max(budgets)} exceeds T_max={cap}")
    d = _outdir(cfg, "sweep")
    rows = {}
    lines = ["budget | pass@1 | turns(map) | turns(act)"]
    for b in budgets:
        _, results = _episodes(cfg, "sweep", None, (b, cfg.acting_budget))
        m = compute_metrics([r.report for r in results])
        rows[b] = m.as_dict()
        lines.append(f"{b} | {m.pass_at_1:.3f} | {m.avg_turns_map:.2f} | {m.avg_turns_act:.2f}")
    table = "\n".join(lines) + "\n"
    print(table, end="")
    files = [
        _write_text(os.path.join(d, "sweep.tsv"), table.replace(" | ", "\t")),
        _write_text(os.path.join(d, "sweep.json"), json.dumps({str(b): r for b, r in rows.items()}, indent=2) + "\n"),
    ]
    update_manifest(cfg, "sweep", files)
    return rows


def cmd_replay(paths: list[str]) -> bool:
    """Re-execute replay files (or every file in a directory); True iff all match."""
    files = []
    for p in paths:
        if os.path.isdir(p):
            files += sorted(os.path.join(r, f) for r, _, fs in os.walk(p) for f in fs if f.endswith(".jsonl"))
        else:
            files.append(p)
    if not files:
        raise ConfigError("no replay files given")
    ok = True
    for f in files:
        with open(f, encoding="utf-8") as fh:
            try:
                res = replay(fh.read())
            except ValueError as exc:
                print(f"{f}: {exc}")
                ok = False
                continue
        if res.ok:
            print(f"{f}: {res.events} events identical")
        else:
            print(f"{f}: mismatch at event {res.mismatch_at}: {res.detail}")
            ok = False
    return ok


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mapact", description="Map-then-Act runs, benchmarks and exports.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("stage1", "explore training instances and distill global knowledge"),
        ("bench", "run episodes and summarize pass@1, turns and tokens"),
        ("perturb", "run episodes with mid-rollout relocations"),
        ("qa", "score cognitive maps with environment-probing questions"),
        ("export", "write an alignment-filtered trajectory dataset"),
        ("sweep", "vary the mapping budget"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="YAML run configuration")
        p.add_argument("--env", dest="env_id", choices=sorted(FAMILIES))
        p.add_argument("--seeds", help="evaluation seeds: 'a:b' or '1,2,3'")
        p.add_argument("--train-seeds", dest="train_seeds", help="Stage-1 seeds, same forms as --seeds")
        p.add_argument("--paradigm", choices=PARADIGMS)
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--knowledge", dest="knowledge_path", help="K_g file (default output_dir/knowledge_<env>.json)")
        p.add_argument("--workers", type=int)
        p.add_argument("--mapping-budget", dest="mapping_budget", type=int)
        p.add_argument("--acting-budget", dest="acting_budget", type=int)
        p.add_argument("--stage1-budget", dest="stage1_budget", type=int)
        p.add_argument("--ablate", action="append", choices=("stage1", "stage2") + MAP_COMPONENTS)
        p.add_argument("--backend", choices=("oracle", "remote"))
        p.add_argument("--endpoint")
        p.add_argument("--model")
        p.add_argument("--transcript", help="replay a recorded remote transcript instead of calling the endpoint")
        p.add_argument("--perturb-prob", dest="perturb_prob", type=float)
        p.add_argument("--perturb-steps", dest="perturb_steps", help="inclusive acting-step range 'lo:hi'")
        p.add_argument("--coverage-min", dest="coverage_min", type=float)
        p.add_argument("--accuracy-min", dest="accuracy_min", type=float)
        p.add_argument("--budgets", help="sweep budgets, e.g. '2,5,10,15'")
    p = sub.add_parser("replay", help="re-execute replay files and compare observations byte for byte")
    p.add_argument("paths", nargs="+")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            return 0 if cmd_replay(args.paths) else 1
        cfg = apply_overrides(load_config(args.config), args)
        {
            "stage1": cmd_stage1,
            "bench": cmd_bench,
            "perturb": cmd_perturb,
            "qa": cmd_qa,
            "export": cmd_export,
            "sweep": cmd_sweep,
        }[args.command](cfg)
        return 0
    except ConfigError as exc:
        print(f"mapact {args.command}: {exc}", file=sys.stderr)
        return 2
    except (ParseError, OSError, RuntimeError) as exc:
        print(f"mapact {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
