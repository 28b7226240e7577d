"""Sequential active-learning loop.

Each trial re-estimates every candidate's credible interval, classifies the
candidate set, then either explores (uniform draw) or exploits the configured
acquisition, perturbs the chosen input, observes the black box, and refits the
surrogate.  Every random draw derives from the run seed through the documented
streams in ``seeding``, so a run is a pure function of (config, inputs).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import acquisition, input_models, reliability, seeding
from .gp import GpPosterior
from .reliability import ClassificationState, QuadratureSpec

METHODS = ("proposed", "straddle", "mile", "random")
SELECTION_TIE_TOL = 1e-9

REASON_U_EMPTY = "u_empty"
REASON_BUDGET = "budget"


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class ExplorationSchedule:
    """Per-trial exploration probability: constant, or ``value / t`` capped at 1."""

    kind: str = "constant"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "harmonic"):
            raise ConfigurationError(f"unknown exploration schedule kind {self.kind!r}")
        if self.kind == "constant" and not (0.0 <= self.value <= 1.0):
            raise ConfigurationError("constant exploration probability must lie in [0, 1]")
        if self.kind == "harmonic" and self.value < 0:
            raise ConfigurationError("harmonic exploration coefficient must be nonnegative")

    def probability(self, trial: int) -> float:
        if self.kind == "constant":
            return self.value
        return min(1.0, self.value / trial)


@dataclass(frozen=True)
class AlgorithmConfig:
    alpha: float = 0.95
    epsilon: float = 0.0
    beta_sqrt: float = 3.0
    threshold: float = 0.0
    method: str = "proposed"
    exploration: ExplorationSchedule = field(default_factory=ExplorationSchedule)
    t_max: int = 100
    quadrature_samples: int = 1000
    outer_samples: int = 64
    run_seed: int = 0
    stop_on_empty_u: bool = False
    n_initial: int = 1
    straddle_kappa: float = acquisition.DEFAULT_STRADDLE_KAPPA
    record_intervals: bool = False

    def __post_init__(self):
        if not (0 < self.alpha < 1):
            raise ConfigurationError(f"alpha out of range (0, 1): {self.alpha}")
        if self.epsilon < 0:
            raise ConfigurationError(f"epsilon must be nonnegative: {self.epsilon}")
        if self.beta_sqrt < 0:
            raise ConfigurationError(f"beta_sqrt must be nonnegative: {self.beta_sqrt}")
        if self.t_max < 1:
            raise ConfigurationError(f"t_max must be >= 1: {self.t_max}")
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.quadrature_samples < 1 or self.outer_samples < 1:
            raise ConfigurationError("sample counts must be >= 1")
        if self.n_initial < 0:
            raise ConfigurationError("n_initial must be nonnegative")
        if not (0 <= self.run_seed <= seeding.MAX_SEED):
            raise ConfigurationError("run_seed must fit in 64 bits")


@dataclass(frozen=True)
class TrialRecord:
    """One loop iteration: the classification seen at selection time plus the
    evaluation made from it."""

    t: int
    explored: bool
    x_index: int
    x: tuple
    s: tuple
    y: float
    h_count: int
    l_count: int
    u_count: int
    labels: str
    winner_score: float | None
    wall_clock: float = field(compare=False, default=0.0)
    f1: float | None = None
    precision: float | None = None
    recall: float | None = None
    intervals: tuple | None = None


@dataclass
class RunResult:
    """Full history of one run.

    ``terminal_state`` is the last classification computed; on a budget stop
    it equals the final record's classification, on an early stop it is the
    fresh classification whose unclassified set came up empty (no evaluation
    follows it).
    """

    config: AlgorithmConfig
    records: list
    terminal_state: ClassificationState
    termination_reason: str

    @property
    def terminal_labels(self) -> tuple:
        return self.terminal_state.labels


def select_point(scores) -> int:
    """Index of the maximal score; near-ties (within 1e-9) go to the lowest index."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ConfigurationError("empty candidate list")
    if not np.all(np.isfinite(scores)):
        raise ConfigurationError("non-finite acquisition score")
    return int(np.argmax(scores >= scores.max() - SELECTION_TIE_TOL))


def stopping(state: ClassificationState, t: int, config: AlgorithmConfig) -> str | None:
    """Return a termination reason, or None to continue."""
    if config.stop_on_empty_u and state.u_count == 0:
        return REASON_U_EMPTY
    if t >= config.t_max:
        return REASON_BUDGET
    return None


def _scores(gp, model, candidates, h, gate, config, nodes, phi, trial):
    method = config.method
    if method == "proposed":
        reps = acquisition.select_representatives(gp, model, candidates, h, nodes, phi)
        shifts = model.sample_shifts(
            seeding.stream_rng(config.run_seed, seeding.STREAM_OUTER, trial),
            config.outer_samples,
        )
        return acquisition.improvement_scores(gp, candidates, reps, h, gate, shifts)
    if method == "straddle":
        return acquisition.straddle_scores(gp, candidates, h, config.straddle_kappa)
    if method == "mile":
        return acquisition.mile_scores(gp, candidates, h, gate)
    rng = seeding.stream_rng(config.run_seed, seeding.STREAM_SELECT, trial)
    return acquisition.random_scores(candidates.shape[0], rng)


def run(config: AlgorithmConfig, gp0: GpPosterior, dist, candidates: np.ndarray, f,
        oracle=None, environment=None) -> RunResult:
    """Run the loop until the unclassified set empties (if enabled) or the budget ends.

    Parameters
    ----------
    gp0 : GpPosterior
        Starting surrogate (may be the bare prior).
    dist : InputDistribution
        The learner's model of the input perturbation; estimated components
        are updated from realized shifts as the run proceeds.
    candidates : (n, d) array
    f : callable
        Noiseless truth, ``f(point) -> float``; the loop adds observation
        noise from its own stream.
    oracle : optional
        True-reliability table with a ``metrics_for(labels, alpha)`` method;
        when given, per-trial retrieval metrics are attached to the records.
    environment : InputDistribution, optional
        The true perturbation law generating executed inputs; defaults to
        ``dist`` (only differs when the shift law is being estimated).
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if candidates.shape[0] == 0:
        raise ConfigurationError("empty candidate list")
    env = dist if environment is None else environment
    gp, model = gp0, dist
    h = config.threshold
    noise_sd = np.sqrt(gp0.noise_variance)
    gate = acquisition.entry_threshold(config.alpha, config.epsilon, config.beta_sqrt).value
    quad = QuadratureSpec(sample_count=config.quadrature_samples, run_seed=config.run_seed)

    rng_init = seeding.stream_rng(config.run_seed, seeding.STREAM_INITIAL_DESIGN)
    for _ in range(config.n_initial):
        idx = int(rng_init.integers(candidates.shape[0]))
        s = input_models.sample(env, candidates[idx], rng_init, 1)[0]
        y = float(f(s)) + noise_sd * rng_init.normal()
        gp = gp.add_observation(s, y)
        model = input_models.update_with_shift(model, s - candidates[idx])

    records = []
    t = 1
    while True:
        started = time.perf_counter()
        estimates, nodes, phi = reliability.sweep(gp, model, candidates, h, quad, t, config.beta_sqrt)
        state = reliability.classify(estimates, config.alpha, config.epsilon)
        if config.stop_on_empty_u and state.u_count == 0:
            return RunResult(config, records, state, REASON_U_EMPTY)

        p_t = config.exploration.probability(t)
        explored = bool(
            seeding.stream_rng(config.run_seed, seeding.STREAM_EXPLORE, t).random() < p_t
        )
        if explored:
            rng = seeding.stream_rng(config.run_seed, seeding.STREAM_SELECT, t)
            x_index = int(rng.integers(candidates.shape[0]))
            winner_score = None
        else:
            scores = _scores(gp, model, candidates, h, gate, config, nodes, phi, t)
            x_index = select_point(scores)
            winner_score = float(scores[x_index])

        x_t = candidates[x_index]
        s_t = input_models.sample(env, x_t, seeding.stream_rng(config.run_seed, seeding.STREAM_PERTURB, t), 1)[0]
        y_t = float(f(s_t)) + noise_sd * float(
            seeding.stream_rng(config.run_seed, seeding.STREAM_NOISE, t).normal()
        )

        metric = oracle.metrics_for(state.labels, config.alpha) if oracle is not None else None
        records.append(TrialRecord(
            t=t,
            explored=explored,
            x_index=x_index,
            x=tuple(float(v) for v in x_t),
            s=tuple(float(v) for v in s_t),
            y=y_t,
            h_count=state.h_count,
            l_count=state.l_count,
            u_count=state.u_count,
            labels="".join(state.labels),
            winner_score=winner_score,
            wall_clock=time.perf_counter() - started,
            f1=None if metric is None else metric.f1,
            precision=None if metric is None else metric.precision,
            recall=None if metric is None else metric.recall,
            intervals=tuple((e.lower, e.upper) for e in estimates) if config.record_intervals else None,
        ))

        gp = gp.add_observation(s_t, y_t)
        model = input_models.update_with_shift(model, s_t - x_t)
        reason = stopping(state, t, config)
        if reason is not None:
            return RunResult(config, records, state, reason)
        t += 1
