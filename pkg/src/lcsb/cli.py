"""Command-line entry point: ``lcsb <command> [flags]``.

Exit codes: 0 success, 2 usage or config error, 3 runtime or data error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import ingest, search, surrogate
from .core import SearchSpaceSpec
from .evalmetrics import evaluate_surrogate
from .svgplot import line_plot
from .synthspace import NB201_SPACE, SyntheticOracle, generate_dataset

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3
DEFAULT_TRIALS = 30
SPACES = {"nb201": NB201_SPACE}


class CLIError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# -- schemas -----------------------------------------------------------------

_REGRESSOR = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "backend": {"enum": ["gbt", "mlp", "kridge"]},
        "params": {"type": "object"},
        "rng_seed": {"type": "integer", "minimum": 0},
    },
}

_SPACE = {
    "oneOf": [
        {"enum": list(SPACES)},
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["id", "node_count", "edge_list", "op_names", "e_max"],
            "properties": {
                "id": {"type": "string"},
                "node_count": {"type": "integer", "minimum": 2},
                "edge_list": {"type": "array", "items": {"type": "array", "items": {"type": "integer"},
                                                         "minItems": 2, "maxItems": 2}},
                "op_names": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "e_max": {"type": "integer", "minimum": 2},
            },
        },
    ]
}

SURROGATE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "k": {"oneOf": [{"type": "integer", "minimum": 1}, {"const": "auto"}, {"type": "null"}]},
        "mu": _REGRESSOR,
        "noise_kind": {"enum": ["std", "gkde", "window"]},
        "augmentation": {"enum": ["none", "anchor_epochs", "first_n_epochs"]},
        "anchor_epochs": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "first_n": {"type": "integer", "minimum": 0},
        "version": {"type": "string", "minLength": 1},
        "rng_seed": {"type": "integer", "minimum": 0},
        "k_max": {"type": "integer", "minimum": 1},
        "val_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "window_regressor": _REGRESSOR,
    },
}

_SYNTHETIC = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"const": "synthetic"},
        "space": _SPACE,
        "oracle_seed": {"type": "integer", "minimum": 0},
        "noise_scale": {"type": "number", "minimum": 0},
        "base_epoch_cost": {"type": "number", "exclusiveMinimum": 0},
        "mean_logit": {"type": "number"},
        "spread_logit": {"type": "number", "minimum": 0},
        "speed_gain": {"type": "number"},
        "interaction_density": {"type": "number", "minimum": 0, "maximum": 1},
        "interaction_strength": {"type": "number", "minimum": 0},
        "speed_coupling": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

_SURROGATE_BENCH = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "epoch_cost"],
    "oneOf": [{"required": ["path"]}, {"required": ["data"]}],
    "properties": {
        "kind": {"const": "surrogate"},
        "path": {"type": "string"},
        "data": {"type": "string"},
        "epoch_cost": {"type": "number", "exclusiveMinimum": 0},
    },
}

_SEARCH_ENTRY = {
    "type": "object",
    "additionalProperties": False,
    "required": ["algorithm"],
    "oneOf": [{"required": ["budget_seconds"]}, {"required": ["budget_trainings"]}],
    "properties": {
        "algorithm": {"enum": list(search.ALGORITHM_IDS)},
        "budget_seconds": {"type": "number", "exclusiveMinimum": 0},
        "budget_trainings": {"type": "number", "exclusiveMinimum": 0},
        "params": {"type": "object"},
        "label": {"type": "string", "minLength": 1},
        "lce": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "extrapolator": {"enum": list(search.EXTRAPOLATORS)},
                "e_few": {"type": "integer", "minimum": 1},
                "keep_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
    },
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["benchmark", "search"],
    "properties": {
        "benchmark": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": ["synthetic", "surrogate"]}},
            # dispatch on kind so errors point at the offending key
            "if": {"properties": {"kind": {"const": "synthetic"}}},
            "then": _SYNTHETIC,
            "else": _SURROGATE_BENCH,
        },
        "surrogate": SURROGATE_SCHEMA,
        "search": {"type": "array", "items": _SEARCH_ENTRY, "minItems": 1},
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
    },
}


# -- helpers -----------------------------------------------------------------

def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    os.replace(tmp, path)


def _load_json(path: str, schema: dict, what: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise CLIError(EXIT_USAGE, f"{what} file not found: {path}")
    except json.JSONDecodeError as e:
        raise CLIError(EXIT_USAGE, f"{what} {path} is not valid JSON: {e}")
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise CLIError(EXIT_USAGE, f"{what} {path}: {where}: {e.message}")
    return doc


def _read_data(path: str):
    if not Path(path).is_file():
        raise CLIError(EXIT_USAGE, f"dataset file not found: {path}")
    try:
        return ingest.read_dataset(path)
    except ingest.DatasetFormatError as e:
        raise CLIError(EXIT_RUNTIME, f"{path}: {e}")


def _space(value) -> SearchSpaceSpec:
    if isinstance(value, dict):
        return SearchSpaceSpec.from_dict(value)
    if value in SPACES:
        return SPACES[value]
    if Path(value).is_file():
        with open(value, "r", encoding="utf-8") as f:
            return SearchSpaceSpec.from_dict(json.load(f))
    raise CLIError(EXIT_USAGE, f"unknown space {value!r}; use one of {sorted(SPACES)} or a JSON file")


def _oracle(section: dict) -> SyntheticOracle:
    kw = {k: v for k, v in section.items() if k not in ("kind", "space", "oracle_seed")}
    return SyntheticOracle.from_seed(section.get("oracle_seed", 0), _space(section.get("space", "nb201")), **kw)


def _surrogate_config(doc: dict | None) -> surrogate.SurrogateConfig:
    try:
        return surrogate.SurrogateConfig.from_dict(doc or {})
    except (ValueError, TypeError) as e:
        raise CLIError(EXIT_USAGE, f"invalid surrogate config: {e}")


def _benchmark(exp: dict):
    b = exp["benchmark"]
    if b["kind"] == "synthetic":
        return search.OracleBenchmark(_oracle(b))
    if "path" in b:
        try:
            model = surrogate.load_surrogate(b["path"])
        except FileNotFoundError:
            raise CLIError(EXIT_USAGE, f"surrogate file not found: {b['path']}")
        except surrogate.SurrogateFormatError as e:
            raise CLIError(EXIT_RUNTIME, f"{b['path']}: {e}")
    else:
        model = surrogate.fit_surrogate(_read_data(b["data"]), _surrogate_config(exp.get("surrogate")))
    if model.n_aug:
        raise CLIError(EXIT_USAGE, "augmented surrogates cannot drive a search benchmark")
    return search.SurrogateBenchmark(model, b["epoch_cost"])


def _label(entry: dict) -> str:
    if "label" in entry:
        return entry["label"]
    base = entry["algorithm"].upper()
    if "lce" not in entry:
        return base
    return base + {"wpm": "-WPM", "model_based": "-MB"}[entry["lce"].get("extrapolator", "model_based")]


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label)


def _search_configs(exp: dict, benchmark) -> list[tuple[str, search.SearchConfig]]:
    out, seen = [], set()
    full = benchmark.space.e_max
    for entry in exp["search"]:
        if "budget_seconds" in entry:
            budget = float(entry["budget_seconds"])
        else:
            budget = float(entry["budget_trainings"]) * full * benchmark.mean_epoch_cost()
        label = _label(entry)
        if label in seen:
            raise CLIError(EXIT_USAGE, f"duplicate search label {label!r}; set 'label' to disambiguate")
        seen.add(label)
        try:
            cfg = search.SearchConfig(entry["algorithm"], budget, 0, dict(entry.get("params", {})),
                                      entry.get("lce"), label)
        except ValueError as e:
            raise CLIError(EXIT_USAGE, f"search entry {label!r}: {e}")
        out.append((label, cfg))
    return out


def _jobs(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("LCSB_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CLIError(EXIT_USAGE, f"LCSB_JOBS must be an integer, got {env!r}")
    return 1


def _run_trial(args):
    cfg, benchmark = args
    h = search.run_search(cfg, benchmark)
    cp = search.checkpoints(cfg.budget_seconds)
    return h.to_csv(cp), h.to_json(), h.final_regret(), h.total_charged


def _run_all(tasks, benchmark, jobs: int) -> list:
    items = [(cfg, benchmark) for cfg in tasks]
    if jobs <= 1:
        return [_run_trial(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map preserves submission order, so merging stays deterministic
        return list(pool.map(_run_trial, items))


def _fmt(x: float) -> str:
    return "%.17g" % x


def _std(v) -> float:
    v = np.asarray(v, dtype=float)
    return float(v.std(ddof=1)) if len(v) > 1 else 0.0


def _read_trajectory(text: str) -> tuple[np.ndarray, np.ndarray]:
    rows = list(csv.reader(io.StringIO(text)))[1:]
    return np.array([float(r[0]) for r in rows]), np.array([float(r[1]) for r in rows])


# -- commands ----------------------------------------------------------------

def cmd_gen_data(a) -> int:
    space = _space(a.space)
    if a.n_arch < 1 or a.seeds_per_arch < 1:
        raise CLIError(EXIT_USAGE, "--n-arch and --seeds-per-arch must be >= 1")
    if a.n_arch > space.size:
        raise CLIError(EXIT_USAGE, f"--n-arch {a.n_arch} exceeds the space size {space.size}")
    oracle = SyntheticOracle.from_seed(a.oracle_seed, space, noise_scale=a.noise_scale)
    ds = generate_dataset(oracle, a.n_arch, a.seeds_per_arch, a.seed)
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    ingest.write_dataset(a.out, ds)
    print(f"wrote {len(ds)} records ({a.n_arch} architectures x {a.seeds_per_arch} seeds) to {a.out}")
    return EXIT_OK


def cmd_fit(a) -> int:
    doc = _load_json(a.config, SURROGATE_SCHEMA, "surrogate config") if a.config else {}
    config = _surrogate_config(doc)
    ds = _read_data(a.data)
    try:
        model = surrogate.fit_surrogate(ds, config)
    except ValueError as e:
        raise CLIError(EXIT_RUNTIME, f"fit failed: {e}")
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    surrogate.save_surrogate(model, a.out)
    r = model.fit_report
    print(f"k = {r['k']} ({r['k_source']})")
    print(f"trained on {r['n_train_records']} records, {r['n_train_archs']} architectures")
    print(f"mu: {config.mu.backend}, noise: {config.noise_kind}, augmentation: {config.augmentation}")
    print(f"saved surrogate to {a.out}")
    return EXIT_OK


def cmd_eval(a) -> int:
    try:
        model = surrogate.load_surrogate(a.surrogate)
    except FileNotFoundError:
        raise CLIError(EXIT_USAGE, f"surrogate file not found: {a.surrogate}")
    except surrogate.SurrogateFormatError as e:
        raise CLIError(EXIT_RUNTIME, f"{a.surrogate}: {e}")
    test = _read_data(a.test)
    if test.space != model.space:
        raise CLIError(EXIT_USAGE, "test set and surrogate use different search spaces")
    seen = set(model.fit_report.get("train_archs", []))
    overlap = sorted(str(x) for x in test.unique_archs() if str(x) in seen)
    if overlap:
        raise CLIError(EXIT_USAGE, f"{len(overlap)} test architectures were used for training, e.g. {overlap[0]}")
    try:
        report = evaluate_surrogate(model, test, "test", kl_seeds=a.kl_seeds, seed=a.seed)
    except ValueError as e:
        raise CLIError(EXIT_RUNTIME, f"evaluation failed: {e}")
    out = Path(a.out)
    _write_atomic(out / "report.csv", report.to_csv())
    _write_atomic(out / "report.json", report.to_json() + "\n")
    print(report.to_csv(), end="")
    return EXIT_OK


def _trial_seeds(exp: dict) -> list[int]:
    base = exp.get("seed", 0)
    return [base + t for t in range(exp.get("trials", DEFAULT_TRIALS))]


def cmd_search(a) -> int:
    exp = _load_json(a.config, EXPERIMENT_SCHEMA, "experiment config")
    out = Path(a.out or exp.get("output") or "")
    if not str(out):
        raise CLIError(EXIT_USAGE, "no output directory: pass --out or set 'output'")
    benchmark = _benchmark(exp)
    configs = _search_configs(exp, benchmark)
    seeds = _trial_seeds(exp)
    tasks = [cfg.with_seed(s) for _, cfg in configs for s in seeds]
    results = _run_all(tasks, benchmark, _jobs(a.jobs))

    series, summary = [], []
    for i, (label, cfg) in enumerate(configs):
        curves, finals, trues = [], [], []
        for t, s in enumerate(seeds):
            traj, events, _, _ = results[i * len(seeds) + t]
            name = f"{_slug(label)}_trial{t:03d}"
            _write_atomic(out / "trajectories" / f"{name}.csv", traj)
            _write_atomic(out / "events" / f"{name}.json", events + "\n")
            times, val = _read_trajectory(traj)
            curves.append(val)
            finals.append(val[-1])
            last = list(csv.reader(io.StringIO(traj)))[-1][2]
            trues.append(float(last) if last else np.nan)
        curves = np.array(curves)
        summary.append([label, len(seeds), _fmt(cfg.budget_seconds), _fmt(np.mean(finals)), _fmt(_std(finals)),
                        _fmt(np.median(finals)), _fmt(np.mean(trues)), _fmt(_std(trues))])
        series.append((label, times, np.median(curves, axis=0), curves.mean(axis=0), curves.std(axis=0)))

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["algorithm", "trials", "budget_seconds", "final_regret_mean", "final_regret_std",
                "final_regret_median", "final_true_regret_mean", "final_true_regret_std"])
    w.writerows(summary)
    _write_atomic(out / "summary.csv", buf.getvalue())

    # anytime medians, one column per algorithm (checkpoints differ if budgets differ)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["algorithm", "sim_time", "median_regret", "mean_regret", "std_regret"])
    for label, times, med, mean, sd in series:
        for row in zip(times, med, mean, sd):
            w.writerow([label, *map(_fmt, row)])
    _write_atomic(out / "anytime.csv", buf.getvalue())

    svg = line_plot([(label, times, mean, sd) for label, times, _, mean, sd in series],
                    "Validation regret over simulated time", "simulated time [s]", "regret", log_x=True)
    _write_atomic(out / "regret.svg", svg)
    for row in summary:
        print(f"{row[0]}: final regret {float(row[3]):.5f} +- {float(row[4]):.5f} over {row[1]} trials")
    return EXIT_OK


def cmd_ablate_fidelity(a) -> int:
    exp = _load_json(a.config, EXPERIMENT_SCHEMA, "experiment config")
    out = Path(a.out or exp.get("output") or "")
    if not str(out):
        raise CLIError(EXIT_USAGE, "no output directory: pass --out or set 'output'")
    try:
        efews = [int(x) for x in a.efew_list.split(",") if x.strip()]
    except ValueError:
        raise CLIError(EXIT_USAGE, f"--efew-list must be comma-separated integers, got {a.efew_list!r}")
    benchmark = _benchmark(exp)
    e_max = benchmark.space.e_max
    if not efews or any(not 1 <= e < e_max for e in efews):
        raise CLIError(EXIT_USAGE, f"E_few values must lie in [1, {e_max - 1}]")
    all_configs = _search_configs(exp, benchmark)
    configs = [(l, c) for l, c in all_configs if c.lce is not None]
    if not configs:
        # no LCE entries: wrap every entry LCE can wrap with the model-based extrapolator
        configs = [(f"{l}-MB", c) for l, c in all_configs if c.algorithm in search.LCE_BASES]
    if not configs:
        raise CLIError(EXIT_USAGE, "no search entry uses an algorithm that LCE can wrap (ls, rea, bananas)")
    seeds = _trial_seeds(exp)
    tasks, keys = [], []
    for label, cfg in configs:
        lce = dict(cfg.lce or {"extrapolator": "model_based"})
        for e in efews:
            lce["e_few"] = e
            run = search.SearchConfig(cfg.algorithm, cfg.budget_seconds, 0, cfg.params, dict(lce), label)
            for s in seeds:
                tasks.append(run.with_seed(s))
                keys.append((label, e, s))
    results = _run_all(tasks, benchmark, _jobs(a.jobs))

    runs = io.StringIO()
    wr = csv.writer(runs, lineterminator="\n")
    wr.writerow(["algorithm", "e_few", "seed", "budget_seconds", "charged_seconds", "final_regret"])
    table = {}
    for (label, e, s), cfg, (_, _, final, charged) in zip(keys, tasks, results):
        wr.writerow([label, e, s, _fmt(cfg.budget_seconds), _fmt(charged), _fmt(final)])
        table.setdefault((label, e), (cfg.budget_seconds, []))[1].append(final)
    _write_atomic(out / "ablation_runs.csv", runs.getvalue())

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["algorithm", "e_few", "budget_seconds", "trials", "final_regret_median", "final_regret_mean",
                "final_regret_std"])
    series = []
    for label, _ in configs:
        med = []
        for e in efews:
            budget, finals = table[(label, e)]
            med.append(np.median(finals))
            w.writerow([label, e, _fmt(budget), len(finals), _fmt(np.median(finals)), _fmt(np.mean(finals)),
                        _fmt(_std(finals))])
        series.append((label, efews, med, None))
    _write_atomic(out / "ablation.csv", buf.getvalue())
    _write_atomic(out / "ablation.svg", line_plot(series, "Final regret by extrapolation fidelity",
                                                  "E_few [epochs]", "median final regret"))
    print(buf.getvalue(), end="")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lcsb", description="Learning-curve surrogate benchmarks for NAS.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="sample a synthetic learning-curve dataset")
    g.add_argument("--space", default="nb201", help="space id or JSON file (default nb201)")
    g.add_argument("--n-arch", type=int, required=True)
    g.add_argument("--seeds-per-arch", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--oracle-seed", type=int, default=0)
    g.add_argument("--noise-scale", type=float, default=0.03)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    f = sub.add_parser("fit", help="fit a surrogate and save it")
    f.add_argument("--data", required=True)
    f.add_argument("--config", help="surrogate config JSON (defaults when omitted)")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("eval", help="evaluate a surrogate on held-out architectures")
    e.add_argument("--surrogate", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--kl-seeds", type=int, default=10)
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("search", help="run NAS trials on a benchmark")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--jobs", type=int, help="worker processes (default: $LCSB_JOBS or 1)")
    s.set_defaults(func=cmd_search)

    a = sub.add_parser("ablate-fidelity", help="sweep the LCE extrapolation epoch")
    a.add_argument("--config", required=True)
    a.add_argument("--efew-list", default="10,20,30,40")
    a.add_argument("--out")
    a.add_argument("--jobs", type=int, help="worker processes (default: $LCSB_JOBS or 1)")
    a.set_defaults(func=cmd_ablate_fidelity)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except CLIError as e:
        print(f"lcsb: error: {e}", file=sys.stderr)
        return e.code
    except (ValueError, OSError) as e:
        print(f"lcsb: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
