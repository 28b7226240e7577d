"""Point-selection scores for the active-learning loop.

The proposed score is a one-integral approximation of the expected one-step
improvement in the number of points classified into the upper set: for each
candidate it averages, over sampled execution points s*, the closed-form
probability (over the unseen observation y*) that each representative point
would clear the classification gate after the update.  Straddle, MILE, and a
seeded-random baseline are provided for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from . import input_models
from .gp import DEGENERATE_COV_FRACTION, GpPosterior
from .reliability import prob_below

DEFAULT_STRADDLE_KAPPA = 1.96


@dataclass(frozen=True)
class EntryThreshold:
    """Gate level c: the below-threshold probability a point needs before its
    approximate credible lower bound clears the target level."""

    alpha_eff: float
    beta: float
    value: float


def entry_threshold(alpha: float, epsilon: float, beta_sqrt: float) -> EntryThreshold:
    """Solve the gate level in closed form.

    c is the larger root of ``(1+beta) c^2 - (2 a + beta) c + a^2 = 0`` with
    ``a = alpha - epsilon``; equivalently the level at which
    ``c - sqrt(beta c (1-c)) = a``.  For beta = 0 the gate degenerates to a.
    """
    a = alpha - epsilon
    if not (0 < a < 1):
        raise ValueError(f"alpha - epsilon must lie in (0, 1), got {a}")
    if beta_sqrt < 0:
        raise ValueError("beta_sqrt must be nonnegative")
    beta = beta_sqrt**2
    if beta == 0.0:
        return EntryThreshold(alpha_eff=a, beta=0.0, value=a)
    disc = beta * beta + 4.0 * a * beta * (1.0 - a)
    c = (2.0 * a + beta + np.sqrt(disc)) / (2.0 * (1.0 + beta))
    return EntryThreshold(alpha_eff=a, beta=beta, value=float(min(c, 1.0)))


@dataclass(frozen=True)
class RepresentativeSet:
    """One representative execution point per candidate, with the value of the
    selection integrand at the chosen point."""

    points: np.ndarray
    criterion: np.ndarray

    def __len__(self) -> int:
        return self.points.shape[0]


def select_representatives(gp: GpPosterior, dist, candidates: np.ndarray, h: float,
                           search_nodes, phi=None) -> RepresentativeSet:
    """Pick, for each candidate, the point maximizing phi*(1-phi)*density.

    The search set per candidate is its quadrature node set plus the mean
    execution point, evaluated under the current posterior; ties go to the
    lowest node index (mean point last).
    """
    candidates = np.atleast_2d(candidates)
    n = candidates.shape[0]
    mean_shift = dist.mean_shift()
    means = candidates + mean_shift
    phi_mean = np.atleast_1d(prob_below(gp, h, means))
    if phi is None:
        phi = [np.atleast_1d(prob_below(gp, h, nodes)) for nodes in search_nodes]
    pools = [np.vstack([search_nodes[i], means[i][None, :]]) for i in range(n)]
    sizes = [p.shape[0] for p in pools]
    shifts = np.vstack(pools) - np.repeat(candidates, sizes, axis=0)
    dens_all = input_models.marginal_shift_density(dist, shifts)
    points = np.empty_like(means)
    crit = np.empty(n)
    offset = 0
    for i in range(n):
        dens = dens_all[offset : offset + sizes[i]]
        offset += sizes[i]
        phi_pool = np.append(phi[i], phi_mean[i])
        values = phi_pool * (1.0 - phi_pool) * dens
        best = int(np.argmax(values))
        points[i] = pools[i][best]
        crit[i] = values[best]
    return RepresentativeSet(points=points, criterion=crit)


def _upper_terms(gp: GpPosterior, rep_points: np.ndarray, rep_mean: np.ndarray,
                 rep_var: np.ndarray, s_stars: np.ndarray, h: float, c: float) -> np.ndarray:
    """(R, S) matrix of per-representative, per-execution-point gate probabilities.

    Entry (r, s) is the probability over the unseen observation at s_stars[s]
    that the one-step-ahead posterior at rep_points[r] satisfies
    Phi((h - mean)/sd) > c.  Where the posterior covariance between the two
    points is negligible the fantasy is observation-independent and the entry
    is a hard 0/1 indicator (ties count as 0).
    """
    z_c = ndtri(c)
    k = gp.posterior_cov(rep_points, s_stars)
    _, var_star = gp.posterior(s_stars)
    pred_var = var_star + gp.noise_variance
    cond_var = np.clip(rep_var[:, None] - k**2 / pred_var[None, :], 0.0, None)
    margin = h - rep_mean[:, None] - z_c * np.sqrt(cond_var)
    kappa_min = DEGENERATE_COV_FRACTION * gp.kernel.signal_variance
    degenerate = np.abs(k) < kappa_min
    safe_k = np.where(degenerate, 1.0, np.abs(k))
    terms = ndtr(np.sqrt(pred_var)[None, :] / safe_k * margin)
    return np.where(degenerate, (margin > 0).astype(float), terms)


def expected_upper_count(gp: GpPosterior, s_star, reps: RepresentativeSet | np.ndarray,
                         h: float, c: float) -> float:
    """Expected number of representatives classified into the upper set after a
    hypothetical evaluation at ``s_star`` (expectation over the observation)."""
    points = reps.points if isinstance(reps, RepresentativeSet) else np.atleast_2d(reps)
    mean, var = gp.posterior(points)
    s_star = np.asarray(s_star, dtype=float).reshape(1, -1)
    return float(_upper_terms(gp, points, mean, var, s_star, h, c).sum())


def classified_count(gp: GpPosterior, points: np.ndarray, h: float, c: float) -> int:
    """Number of points whose current below-threshold probability clears the gate.

    Candidate-independent baseline subtracted from improvement scores; any
    constant leaves the argmax unchanged, so it is recorded for diagnostics only.
    """
    phi = np.atleast_1d(prob_below(gp, h, points))
    return int(np.sum(phi > c))


@dataclass(frozen=True)
class AcquisitionEvaluation:
    """Score for one candidate plus its per-execution-point breakdown."""

    candidate: tuple
    score: float
    inner_sums: tuple
    baseline: float
    method: str


def improvement_score(gp: GpPosterior, x, reps: RepresentativeSet, h: float, c: float,
                      outer_nodes: np.ndarray) -> AcquisitionEvaluation:
    """Proposed score for a single candidate given its execution-point sample."""
    outer_nodes = np.atleast_2d(outer_nodes)
    mean, var = gp.posterior(reps.points)
    terms = _upper_terms(gp, reps.points, mean, var, outer_nodes, h, c)
    inner = terms.sum(axis=0)
    baseline = float(classified_count(gp, reps.points, h, c))
    return AcquisitionEvaluation(
        candidate=tuple(np.asarray(x, dtype=float).ravel()),
        score=float(np.mean(inner) - baseline),
        inner_sums=tuple(inner),
        baseline=baseline,
        method="proposed",
    )


def improvement_scores(gp: GpPosterior, candidates: np.ndarray, reps: RepresentativeSet,
                       h: float, c: float, outer_shifts: np.ndarray) -> np.ndarray:
    """Proposed scores for all candidates with shared shift deviates.

    The same block of outer shift draws is added to every candidate (common
    random numbers), which keeps the argmax stable at small sample counts.
    """
    candidates = np.atleast_2d(candidates)
    n = candidates.shape[0]
    m = outer_shifts.shape[0]
    s_stars = (candidates[:, None, :] + outer_shifts[None, :, :]).reshape(n * m, -1)
    mean, var = gp.posterior(reps.points)
    terms = _upper_terms(gp, reps.points, mean, var, s_stars, h, c)
    inner = terms.sum(axis=0).reshape(n, m)
    baseline = classified_count(gp, reps.points, h, c)
    return inner.mean(axis=1) - baseline


def straddle(gp: GpPosterior, x, h: float, kappa: float = DEFAULT_STRADDLE_KAPPA) -> float:
    """Uncertainty-minus-distance score at the nominal candidate point."""
    mu, var = gp.posterior(np.asarray(x, dtype=float))
    return kappa * float(np.sqrt(var)) - abs(mu - h)


def straddle_scores(gp: GpPosterior, candidates: np.ndarray, h: float,
                    kappa: float = DEFAULT_STRADDLE_KAPPA) -> np.ndarray:
    mu, var = gp.posterior(np.atleast_2d(candidates))
    return kappa * np.sqrt(var) - np.abs(mu - h)


def mile(gp: GpPosterior, candidates: np.ndarray, x, h: float, c: float) -> float:
    """No-input-uncertainty specialization: a single execution point at the
    candidate itself, with the full candidate grid as representatives."""
    candidates = np.atleast_2d(candidates)
    gain = expected_upper_count(gp, x, candidates, h, c)
    return gain - classified_count(gp, candidates, h, c)


def mile_scores(gp: GpPosterior, candidates: np.ndarray, h: float, c: float) -> np.ndarray:
    candidates = np.atleast_2d(candidates)
    mean, var = gp.posterior(candidates)
    terms = _upper_terms(gp, candidates, mean, var, candidates, h, c)
    return terms.sum(axis=0) - classified_count(gp, candidates, h, c)


def random_scores(n: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded uniform scores; the argmax is a uniform selection."""
    return rng.random(n)
