"""Ground-truth benchmark functions, reliability oracles, metrics, and the
replicated-experiment driver."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from . import engine, input_models
from .gp import GpPosterior, KernelSpec
from .reliability import LABEL_UPPER
from .seeding import STREAM_ORACLE, STREAM_TRUTH, replication_seed, stream_rng


def quartic(s: np.ndarray) -> np.ndarray:
    x = np.asarray(s)[..., 0]
    return 3.0 - 40.0 * x + 38.0 * x**2 - 11.0 * x**3 + x**4


def sinusoidal(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s)
    x1, x2 = s[..., 0], s[..., 1]
    return -np.sin(10.0 * x1) - np.cos(4.0 * x2) + np.cos(3.0 * x1 * x2)


def himmelblau_m100(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s)
    x1, x2 = s[..., 0], s[..., 1]
    return (x1**2 + x2 - 11.0) ** 2 + (x1 + x2**2 - 7.0) ** 2 - 100.0


@dataclass(frozen=True)
class BenchmarkFunction:
    """A deterministic truth function with its candidate grid and default setup."""

    name: str
    dim: int
    evaluator: object
    kernel: KernelSpec
    noise_variance: float
    threshold: float
    cases: dict
    box: tuple | None = None
    divisions: tuple | None = None
    candidates: np.ndarray | None = None

    def grid(self) -> np.ndarray:
        """Candidate points: ``divisions[j] + 1`` equispaced values per axis,
        endpoints included, or the explicit candidate list when set."""
        if self.candidates is not None:
            return np.asarray(self.candidates, dtype=float)
        axes = [
            np.linspace(lo, hi, div + 1)
            for (lo, hi), div in zip(self.box, self.divisions)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def __call__(self, s):
        out = self.evaluator(np.asarray(s, dtype=float))
        return float(out) if np.ndim(out) == 0 else out


def _registry() -> dict:
    return {
        "quartic1d": BenchmarkFunction(
            name="quartic1d",
            dim=1,
            evaluator=quartic,
            kernel=KernelSpec(signal_variance=100.0, length_scale=0.5),
            noise_variance=1e-4,
            threshold=8.0,
            box=((-0.5, 5.5),),
            divisions=(40,),
            cases={
                "case1": input_models.GammaShift(shapes=(5.0,), scales=(0.03,)),
                "case2": input_models.GaussianShift(offsets=(0.0,), sds=(0.07,)),
            },
        ),
        "sinusoidal": BenchmarkFunction(
            name="sinusoidal",
            dim=2,
            evaluator=sinusoidal,
            kernel=KernelSpec(signal_variance=float(np.exp(2.0)), length_scale=2e-3),
            noise_variance=1e-4,
            threshold=-0.5,
            box=((0.0, 1.0), (0.0, 2.0)),
            divisions=(30, 60),
            cases={
                "case1": input_models.GammaShift(shapes=(5.0, 5.0), scales=(0.03, 0.03)),
                "case2": input_models.GaussianShift(offsets=(0.0, 0.0), sds=(0.07, 0.07)),
            },
        ),
        "himmelblau_m100": BenchmarkFunction(
            name="himmelblau_m100",
            dim=2,
            evaluator=himmelblau_m100,
            kernel=KernelSpec(signal_variance=float(np.exp(8.0)), length_scale=2.0),
            noise_variance=1e-4,
            threshold=0.0,
            box=((-5.0, 5.0), (-5.0, 5.0)),
            divisions=(50, 50),
            cases={
                "case1": input_models.GammaShift(shapes=(5.0, 5.0), scales=(0.15, 0.15)),
                "case2": input_models.GaussianShift(offsets=(0.0, 0.0), sds=(0.5, 0.5)),
            },
        ),
    }


BENCHMARKS = _registry()


def get_benchmark(name: str) -> BenchmarkFunction:
    try:
        return BENCHMARKS[name]
    except KeyError:
        raise KeyError(f"unknown benchmark {name!r}; available: {sorted(BENCHMARKS)}") from None


@dataclass(frozen=True)
class Metrics:
    """Retrieval metrics with the upper set as the positive class."""

    f1: float
    precision: float
    recall: float
    true_h_empty: bool = False


def metrics(labels, truth: np.ndarray, alpha: float) -> Metrics:
    """Precision/recall/F1 of the predicted upper set against the true one.

    Empty predicted set counts as precision 1 (nothing wrongly claimed); an
    empty true upper set makes recall 1 by convention and is flagged.
    Unclassified candidates count as not predicted.
    """
    pred = np.asarray(list(labels)) == LABEL_UPPER
    true = np.asarray(truth, dtype=float) > alpha
    tp = int(np.sum(pred & true))
    precision = tp / int(pred.sum()) if pred.any() else 1.0
    true_h_empty = not true.any()
    recall = 1.0 if true_h_empty else tp / int(true.sum())
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return Metrics(f1=f1, precision=precision, recall=recall, true_h_empty=true_h_empty)


@dataclass(frozen=True)
class OracleTable:
    """Monte-Carlo table of true reliabilities, one value per candidate."""

    values: np.ndarray
    n_samples: int
    seed: int

    def h_set(self, alpha: float) -> np.ndarray:
        return np.flatnonzero(self.values > alpha)

    def metrics_for(self, labels, alpha: float) -> Metrics:
        return metrics(labels, self.values, alpha)


def true_reliability(f, dist, x, h: float, n: int, rng: np.random.Generator) -> float:
    """MC estimate of P(f(S(x)) < h); the truth carries no observation noise."""
    if n < 1:
        raise ValueError("n must be >= 1")
    draws = input_models.sample(dist, x, rng, n)
    return float(np.mean(np.asarray(f(draws)) < h))


def oracle_table(f, dist, candidates: np.ndarray, h: float, n: int, seed: int) -> OracleTable:
    """Per-candidate oracle with independent derived streams (parallel-safe)."""
    candidates = np.atleast_2d(candidates)
    values = np.array([
        true_reliability(f, dist, candidates[i], h, n, stream_rng(seed, STREAM_ORACLE, i))
        for i in range(candidates.shape[0])
    ])
    return OracleTable(values=values, n_samples=n, seed=seed)


class GpPriorSample:
    """A random-feature draw from the GP prior, evaluable anywhere.

    2048 spectral features reproduce the Gaussian-kernel prior closely enough
    for truth-generation purposes while staying cheap to evaluate.
    """

    def __init__(self, kernel: KernelSpec, dim: int, seed: int, n_features: int = 2048):
        rng = stream_rng(seed, STREAM_TRUTH)
        # exp(-r^2/L) has spectral measure N(0, (2/L) I)
        self._omega = rng.normal(scale=np.sqrt(2.0 / kernel.length_scale), size=(n_features, dim))
        self._phase = rng.uniform(0.0, 2.0 * np.pi, size=n_features)
        self._amp = np.sqrt(kernel.signal_variance * 2.0 / n_features)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        single = s.ndim == 1
        proj = np.atleast_2d(s) @ self._omega.T + self._phase
        vals = self._amp * np.cos(proj).sum(axis=1)
        return float(vals[0]) if single else vals


@dataclass(frozen=True)
class ReplicationOutcome:
    run_id: int
    seed: int
    result: engine.RunResult | None
    error: str | None = None


def run_replication(config: engine.AlgorithmConfig, prior: GpPosterior, dist,
                    candidates: np.ndarray, f, oracle, run_id: int, master_seed: int,
                    environment=None) -> ReplicationOutcome:
    seed = replication_seed(master_seed, run_id)
    cfg = replace(config, run_seed=seed)
    try:
        result = engine.run(cfg, prior, dist, candidates, f, oracle=oracle, environment=environment)
        return ReplicationOutcome(run_id=run_id, seed=seed, result=result)
    except Exception as exc:  # noqa: BLE001 - failed replications are reported, not fatal
        return ReplicationOutcome(run_id=run_id, seed=seed, result=None, error=f"{type(exc).__name__}: {exc}")


def experiment(config: engine.AlgorithmConfig, prior: GpPosterior, dist,
               candidates: np.ndarray, f, oracle, replications: int, master_seed: int,
               environment=None) -> list[ReplicationOutcome]:
    """Independent replications with disjoint derived seeds, in seed order."""
    if replications < 1:
        raise ValueError("replications must be >= 1")
    return [
        run_replication(config, prior, dist, candidates, f, oracle, r, master_seed, environment)
        for r in range(replications)
    ]


def summarize(values) -> tuple[float, float]:
    """Mean and standard error; a single value has zero-width bands."""
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    se = 0.0 if arr.size < 2 else float(arr.std(ddof=1) / np.sqrt(arr.size))
    return mean, se


def aggregate_metric_rows(outcomes, method: str) -> list[dict]:
    """Per-(method, trial) mean and SE of each metric across replications."""
    by_trial: dict[int, dict[str, list]] = {}
    for out in outcomes:
        if out.result is None:
            continue
        for rec in out.result.records:
            if rec.f1 is None:
                continue
            slot = by_trial.setdefault(rec.t, {"f1": [], "precision": [], "recall": []})
            slot["f1"].append(rec.f1)
            slot["precision"].append(rec.precision)
            slot["recall"].append(rec.recall)
    rows = []
    for t in sorted(by_trial):
        for metric_name, vals in by_trial[t].items():
            mean, se = summarize(vals)
            rows.append({
                "method": method, "t": t, "metric": metric_name,
                "mean": mean, "se": se, "n": len(vals),
            })
    return rows


CCPP_COLUMNS = ("AT", "V", "AP", "RH", "PE")
CCPP_ROWS = 9568


def load_ccpp(path) -> tuple[np.ndarray, np.ndarray]:
    """Load and standardize the combined-cycle power-plant CSV.

    Expects the UCI layout: header AT,V,AP,RH,PE and 9,568 data rows.
    Features are standardized to mean 0 / variance 1 and the target is
    centered, with the constants recomputed from the file.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(h.strip() for h in header) != CCPP_COLUMNS:
            raise ValueError(f"unexpected CCPP header {header!r}; want {','.join(CCPP_COLUMNS)}")
        rows = [[float(v) for v in row] for row in reader if row]
    if len(rows) != CCPP_ROWS:
        raise ValueError(f"expected {CCPP_ROWS} CCPP data rows, found {len(rows)}")
    data = np.asarray(rows)
    features = data[:, :4]
    target = data[:, 4]
    features = (features - features.mean(axis=0)) / features.std(axis=0)
    target = target - target.mean()
    return features, target


def build_ccpp_benchmark(features: np.ndarray, target: np.ndarray, seed: int,
                         n_train: int = 7568, n_candidates: int = 2000,
                         kernel: KernelSpec = KernelSpec(300.0, 2.0),
                         noise_variance: float = 0.5,
                         threshold: float = -15.0) -> BenchmarkFunction:
    """Surrogate-truth benchmark: GP mean fit on a random split of the data,
    remaining rows as candidates."""
    n = features.shape[0]
    if n_train + n_candidates != n:
        raise ValueError("n_train + n_candidates must cover the dataset")
    perm = stream_rng(seed, STREAM_TRUTH).permutation(n)
    train, cand = perm[:n_train], perm[n_train:]
    surrogate = GpPosterior(kernel, noise_variance, features[train], target[train])

    def truth(s):
        mean, _ = surrogate.posterior(np.asarray(s, dtype=float))
        return mean

    return BenchmarkFunction(
        name="ccpp",
        dim=4,
        evaluator=truth,
        kernel=kernel,
        noise_variance=noise_variance,
        threshold=threshold,
        candidates=features[cand],
        cases={"case2": input_models.GaussianShift(offsets=(0.0,) * 4, sds=(0.125,) * 4)},
    )
