"""Operator command line: run experiments, build oracles, aggregate reports.

Config files are TOML with strict validation (unknown keys rejected).  Results
are RFC-4180 CSV plus a JSON run summary embedding the resolved config, so any
row is reproducible from its summary alone.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import benchlab, input_models
from .engine import AlgorithmConfig, ExplorationSchedule, METHODS
from .gp import GpPosterior, KernelSpec

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclasses.dataclass
class Polynomial1D:
    coefficients: tuple

    def __call__(self, s):
        x = np.asarray(s)[..., 0]
        out = np.zeros_like(x, dtype=float)
        for c in reversed(self.coefficients):
            out = out * x + c
        return out


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing required key '{where}.{key}'")
    return table[key]


def _check_keys(table: dict, allowed: set, where: str):
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(unknown))}")


def _dist_from_table(table: dict, where: str):
    """Build (model, environment) laws from an [input_distribution] table."""
    kind = _require(table, "kind", where)
    if kind == "gaussian_shift":
        _check_keys(table, {"kind", "offsets", "sds"}, where)
        d = input_models.GaussianShift(
            offsets=_require(table, "offsets", where), sds=_require(table, "sds", where)
        )
        return d, d
    if kind == "gamma_shift":
        _check_keys(table, {"kind", "shapes", "scales"}, where)
        d = input_models.GammaShift(
            shapes=_require(table, "shapes", where), scales=_require(table, "scales", where)
        )
        return d, d
    if kind == "product":
        _check_keys(table, {"kind", "components"}, where)
        parts = [_dist_from_table(c, f"{where}.components[{i}]")
                 for i, c in enumerate(_require(table, "components", where))]
        model = input_models.ProductIndependent(tuple(p[0] for p in parts))
        env = input_models.ProductIndependent(tuple(p[1] for p in parts))
        return model, env
    if kind == "estimated_mean":
        _check_keys(table, {"kind", "known_sd", "prior_mean", "prior_sd", "offset", "true"}, where)
        xi = input_models.NormalMeanPosterior(
            prior_mean=float(table.get("prior_mean", 0.0)),
            prior_variance=float(_require(table, "prior_sd", where)) ** 2,
            obs_variance=float(_require(table, "known_sd", where)) ** 2,
        )
        model = input_models.EstimatedShift(xi=xi, base_offset=float(table.get("offset", 0.0)))
        env = _true_env(table, where)
        return model, env
    if kind == "estimated_precision":
        _check_keys(table, {"kind", "known_mean", "prior_shape", "prior_rate", "prior_scale", "true"}, where)
        if "prior_rate" in table and "prior_scale" in table:
            raise ConfigError(f"give exactly one of prior_rate or prior_scale in [{where}]")
        if "prior_rate" in table:
            rate = float(table["prior_rate"])
        elif "prior_scale" in table:
            rate = 1.0 / float(table["prior_scale"])
        else:
            raise ConfigError(f"missing prior_rate (or prior_scale) in [{where}]")
        xi = input_models.GammaPrecisionPosterior(
            prior_shape=float(_require(table, "prior_shape", where)), prior_rate=rate
        )
        model = input_models.EstimatedShift(xi=xi, base_offset=float(table.get("known_mean", 0.0)))
        env = _true_env(table, where)
        return model, env
    raise ConfigError(f"unknown input_distribution kind {kind!r} in [{where}]")


def _true_env(table: dict, where: str):
    true = _require(table, "true", where)
    _check_keys(true, {"mean", "sd"}, f"{where}.true")
    return input_models.GaussianShift(
        offsets=(float(true.get("mean", 0.0)),), sds=(float(_require(true, "sd", f"{where}.true")),)
    )


def describe_dist(dist) -> dict:
    if isinstance(dist, input_models.GaussianShift):
        return {"kind": "gaussian_shift", "offsets": list(dist.offsets), "sds": list(dist.sds)}
    if isinstance(dist, input_models.GammaShift):
        return {"kind": "gamma_shift", "shapes": list(dist.shapes), "scales": list(dist.scales)}
    if isinstance(dist, input_models.ProductIndependent):
        return {"kind": "product", "components": [describe_dist(c) for c in dist.components]}
    if isinstance(dist, input_models.EstimatedShift):
        xi = dist.xi
        if isinstance(xi, input_models.NormalMeanPosterior):
            return {"kind": "estimated_mean", "offset": dist.base_offset,
                    "known_sd": float(np.sqrt(xi.obs_variance)),
                    "prior_mean": xi.prior_mean, "prior_sd": float(np.sqrt(xi.prior_variance))}
        return {"kind": "estimated_precision", "known_mean": dist.base_offset,
                "prior_shape": xi.shape, "prior_rate": xi.rate}
    raise ConfigError(f"cannot describe distribution {type(dist).__name__}")


EXPERIMENT_KEYS = {
    "benchmark", "case", "method", "alpha", "epsilon", "beta_sqrt", "threshold",
    "iterations", "replications", "seed", "quadrature_samples", "outer_samples",
    "exploration", "stop_on_empty_u", "initial_design", "straddle_kappa",
    "record_intervals", "oracle",
}
KERNEL_KEYS = {"signal_variance", "length_scale", "noise_variance"}
ORACLE_KEYS = {"n_samples", "seed"}
OUTPUT_KEYS = {"directory"}
CUSTOM_KEYS = {"kind", "coefficients", "box", "divisions"}


@dataclasses.dataclass
class RunSetup:
    benchmark: benchlab.BenchmarkFunction
    candidates: np.ndarray
    model_dist: object
    env_dist: object
    algo: AlgorithmConfig
    method: str
    replications: int
    master_seed: int
    oracle_path: str | None
    oracle_samples: int
    oracle_seed: int
    output_dir: str | None
    raw: dict


def _custom_benchmark(table: dict) -> benchlab.BenchmarkFunction:
    _check_keys(table, CUSTOM_KEYS, "custom_function")
    kind = _require(table, "kind", "custom_function")
    if kind != "polynomial1d":
        raise ConfigError(f"unknown custom_function kind {kind!r}")
    coeffs = tuple(float(c) for c in _require(table, "coefficients", "custom_function"))
    box = tuple(tuple(float(v) for v in b) for b in _require(table, "box", "custom_function"))
    divisions = tuple(int(d) for d in _require(table, "divisions", "custom_function"))
    if len(box) != 1 or len(divisions) != 1:
        raise ConfigError("polynomial1d custom functions are one-dimensional")
    return benchlab.BenchmarkFunction(
        name="custom_polynomial1d", dim=1, evaluator=Polynomial1D(coeffs),
        kernel=KernelSpec(1.0, 1.0), noise_variance=1e-4, threshold=0.0,
        box=box, divisions=divisions, cases={},
    )


def load_config(path) -> RunSetup:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML parse error: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    _check_keys(raw, {"schema_version", "experiment", "kernel", "input_distribution",
                      "custom_function", "oracle_generation", "output"}, "top level")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
    exp = _require(raw, "experiment", "top level")
    _check_keys(exp, EXPERIMENT_KEYS, "experiment")

    if "custom_function" in raw:
        if "benchmark" in exp:
            raise ConfigError("give either experiment.benchmark or [custom_function], not both")
        bench = _custom_benchmark(raw["custom_function"])
    else:
        name = _require(exp, "benchmark", "experiment")
        try:
            bench = benchlab.get_benchmark(name)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc

    kernel_tab = raw.get("kernel", {})
    _check_keys(kernel_tab, KERNEL_KEYS, "kernel")
    kernel = KernelSpec(
        signal_variance=float(kernel_tab.get("signal_variance", bench.kernel.signal_variance)),
        length_scale=float(kernel_tab.get("length_scale", bench.kernel.length_scale)),
    )
    noise = float(kernel_tab.get("noise_variance", bench.noise_variance))
    bench = dataclasses.replace(bench, kernel=kernel, noise_variance=noise)

    if "input_distribution" in raw:
        model, env = _dist_from_table(raw["input_distribution"], "input_distribution")
    elif "case" in exp:
        case = exp["case"]
        if case not in bench.cases:
            raise ConfigError(f"benchmark {bench.name!r} has no case {case!r}")
        model = env = bench.cases[case]
    else:
        raise ConfigError("give experiment.case or an [input_distribution] table")
    if model.dim != bench.dim:
        raise ConfigError(f"distribution dimension {model.dim} != benchmark dimension {bench.dim}")

    threshold = float(exp.get("threshold", bench.threshold))
    alpha = float(_require(exp, "alpha", "experiment"))
    if not (0 < alpha < 1):
        raise ConfigError(f"alpha out of range (0, 1): {alpha}")
    exploration = exp.get("exploration", 0.0)
    if isinstance(exploration, dict):
        _check_keys(exploration, {"kind", "value"}, "experiment.exploration")
        schedule = ExplorationSchedule(kind=exploration.get("kind", "constant"),
                                       value=float(exploration.get("value", 0.0)))
    else:
        schedule = ExplorationSchedule(kind="constant", value=float(exploration))

    method = exp.get("method", "proposed")
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
    seed = int(_require(exp, "seed", "experiment"))
    replications = int(_require(exp, "replications", "experiment"))
    if replications < 1:
        raise ConfigError(f"replications must be >= 1: {replications}")

    algo = AlgorithmConfig(
        alpha=alpha,
        epsilon=float(exp.get("epsilon", 0.0)),
        beta_sqrt=float(exp.get("beta_sqrt", 3.0)),
        threshold=threshold,
        method=method,
        exploration=schedule,
        t_max=int(_require(exp, "iterations", "experiment")),
        quadrature_samples=int(exp.get("quadrature_samples", 1000)),
        outer_samples=int(exp.get("outer_samples", 64)),
        stop_on_empty_u=bool(exp.get("stop_on_empty_u", False)),
        n_initial=int(exp.get("initial_design", 1)),
        straddle_kappa=float(exp.get("straddle_kappa", 1.96)),
        record_intervals=bool(exp.get("record_intervals", False)),
    )

    oracle_tab = raw.get("oracle_generation", {})
    _check_keys(oracle_tab, ORACLE_KEYS, "oracle_generation")
    out_tab = raw.get("output", {})
    _check_keys(out_tab, OUTPUT_KEYS, "output")

    return RunSetup(
        benchmark=bench,
        candidates=bench.grid(),
        model_dist=model,
        env_dist=env,
        algo=algo,
        method=method,
        replications=replications,
        master_seed=seed,
        oracle_path=exp.get("oracle"),
        oracle_samples=int(oracle_tab.get("n_samples", 100_000)),
        oracle_seed=int(oracle_tab.get("seed", seed)),
        output_dir=out_tab.get("directory"),
        raw=raw,
    )


def benchmark_fingerprint(setup: RunSetup) -> str:
    payload = {
        "benchmark": setup.benchmark.name,
        "box": setup.benchmark.box,
        "divisions": setup.benchmark.divisions,
        "threshold": setup.algo.threshold,
        "dist": describe_dist(setup.env_dist),
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(float(value))  # builtin repr: shortest round-trip, byte-stable
    return str(value)


def _resolved_config(setup: RunSetup) -> dict:
    algo = dataclasses.asdict(setup.algo)
    algo["exploration"] = dataclasses.asdict(setup.algo.exploration)
    return {
        "benchmark": setup.benchmark.name,
        "method": setup.method,
        "replications": setup.replications,
        "master_seed": setup.master_seed,
        "algorithm": algo,
        "input_distribution": describe_dist(setup.model_dist),
        "environment_distribution": describe_dist(setup.env_dist),
        "kernel": {"signal_variance": setup.benchmark.kernel.signal_variance,
                   "length_scale": setup.benchmark.kernel.length_scale,
                   "noise_variance": setup.benchmark.noise_variance},
    }


def _load_oracle(setup: RunSetup) -> benchlab.OracleTable:
    path = Path(setup.oracle_path)
    if not path.exists():
        raise ConfigError(f"oracle file not found: {path}")
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"oracle schema_version mismatch in {path}")
    if doc.get("benchmark_fingerprint") != benchmark_fingerprint(setup):
        raise ConfigError(f"oracle {path} was built for a different benchmark setup")
    return benchlab.OracleTable(
        values=np.asarray(doc["values"], dtype=float),
        n_samples=int(doc["n_samples"]),
        seed=int(doc["seed"]),
    )


def _replication_task(args):
    setup, oracle, run_id = args
    return benchlab.run_replication(
        setup.algo, _prior(setup), setup.model_dist, setup.candidates,
        setup.benchmark, oracle, run_id, setup.master_seed,
        environment=setup.env_dist,
    )


def _prior(setup: RunSetup) -> GpPosterior:
    return GpPosterior(setup.benchmark.kernel, setup.benchmark.noise_variance)


def _worker_count(replications: int) -> int:
    cap = int(os.environ.get("IURLSE_THREADS", "1"))
    return max(1, min(cap, replications))


def cmd_run(config_path, out_dir=None, seed=None, replications=None, method=None) -> int:
    setup = load_config(config_path)
    if seed is not None:
        setup.master_seed = int(seed)
    if replications is not None:
        setup.replications = int(replications)
        if setup.replications < 1:
            raise ConfigError("replications must be >= 1")
    if method is not None:
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
        setup.method = method
        setup.algo = dataclasses.replace(setup.algo, method=method)
    out = Path(out_dir or setup.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)

    oracle = _load_oracle(setup) if setup.oracle_path else None
    tasks = [(setup, oracle, r) for r in range(setup.replications)]
    workers = _worker_count(setup.replications)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_replication_task, tasks))
    else:
        outcomes = [_replication_task(t) for t in tasks]

    stem = f"{setup.benchmark.name}_{setup.method}"
    csv_path = out / f"{stem}_trials.csv"
    dim = setup.candidates.shape[1]
    header = (["schema_version", "run_id", "seed", "t", "method", "f1", "precision",
               "recall", "h_count", "l_count", "u_count"]
              + [f"x{j}" for j in range(dim)] + ["y", "explored"])
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for outcome in outcomes:
            if outcome.result is None:
                continue
            for rec in outcome.result.records:
                writer.writerow(
                    [SCHEMA_VERSION, outcome.run_id, outcome.seed, rec.t, setup.method,
                     _fmt(rec.f1), _fmt(rec.precision), _fmt(rec.recall),
                     rec.h_count, rec.l_count, rec.u_count]
                    + [_fmt(v) for v in rec.x] + [_fmt(rec.y), _fmt(rec.explored)]
                )

    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": _resolved_config(setup),
        "replications": [
            {
                "run_id": o.run_id,
                "seed": o.seed,
                "error": o.error,
                "termination_reason": None if o.result is None else o.result.termination_reason,
                "trials": None if o.result is None else len(o.result.records),
                "terminal_h": None if o.result is None else [int(i) for i in o.result.terminal_state.indices("H")],
                "terminal_l": None if o.result is None else [int(i) for i in o.result.terminal_state.indices("L")],
            }
            for o in outcomes
        ],
        "aggregate": benchlab.aggregate_metric_rows(outcomes, setup.method),
    }
    with open(out / f"{stem}_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)

    failures = [o for o in outcomes if o.error]
    for o in failures:
        print(f"replication {o.run_id} failed: {o.error}", file=sys.stderr)
    print(f"wrote {csv_path}")
    return 0


def cmd_oracle(config_path, out_dir=None, seed=None) -> int:
    setup = load_config(config_path)
    if seed is not None:
        setup.oracle_seed = int(seed)
    out = Path(out_dir or setup.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    table = benchlab.oracle_table(
        setup.benchmark, setup.env_dist, setup.candidates, setup.algo.threshold,
        setup.oracle_samples, setup.oracle_seed,
    )
    doc = {
        "schema_version": SCHEMA_VERSION,
        "benchmark": setup.benchmark.name,
        "benchmark_fingerprint": benchmark_fingerprint(setup),
        "threshold": setup.algo.threshold,
        "n_samples": table.n_samples,
        "seed": table.seed,
        "values": [float(v) for v in table.values],
    }
    path = out / f"{setup.benchmark.name}_oracle.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    print(f"wrote {path}")
    return 0


def cmd_report(result_paths, out_path) -> int:
    groups: dict[tuple, list[float]] = {}
    for path in result_paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                if row.get("schema_version") != str(SCHEMA_VERSION):
                    raise ConfigError(f"{path}: schema_version mismatch")
                for metric in ("f1", "precision", "recall"):
                    cell = row.get(metric, "")
                    if cell:
                        key = (row["method"], int(row["t"]), metric)
                        groups.setdefault(key, []).append(float(cell))
    rows = []
    for (method, t, metric), values in sorted(groups.items()):
        mean, se = benchlab.summarize(values)
        rows.append([SCHEMA_VERSION, method, t, metric, repr(mean), repr(se), len(values)])
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["schema_version", "method", "t", "metric", "mean", "se", "n"])
        writer.writerows(rows)
    print(f"wrote {out_path}")
    return 0


def cmd_list() -> int:
    for name in sorted(benchlab.BENCHMARKS):
        b = benchlab.BENCHMARKS[name]
        cases = ", ".join(sorted(b.cases))
        print(f"{name}: dim={b.dim} grid={'x'.join(str(d + 1) for d in b.divisions)} "
              f"threshold={b.threshold} cases=[{cases}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iurlse", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--replications", type=int, default=None)
    p_run.add_argument("--method", default=None)

    p_oracle = sub.add_parser("oracle", help="build the ground-truth reliability table")
    p_oracle.add_argument("--config", required=True)
    p_oracle.add_argument("--out", default=None)
    p_oracle.add_argument("--seed", type=int, default=None)

    p_report = sub.add_parser("report", help="aggregate result CSVs for plotting")
    p_report.add_argument("results", nargs="+")
    p_report.add_argument("--out", required=True)

    sub.add_parser("list-benchmarks", help="list bundled benchmarks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config, args.out, args.seed, args.replications, args.method)
        if args.command == "oracle":
            return cmd_oracle(args.config, args.out, args.seed)
        if args.command == "report":
            return cmd_report(args.results, args.out)
        return cmd_list()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
