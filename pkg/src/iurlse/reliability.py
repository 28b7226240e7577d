"""Reliability estimates and candidate classification.

For each candidate x the reliability (probability that the perturbed
evaluation lands below the threshold) is summarized under the current GP
posterior by a Monte-Carlo quadrature mean and a variance-style spread term,
yielding a Chebyshev credible interval.  Candidates whose interval clears the
target level are classified into the upper set H, those whose interval falls
below it into the lower set L, the rest stay unclassified.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

from . import input_models
from .gp import GpPosterior
from .seeding import STREAM_QUADRATURE, stream_rng

LABEL_UPPER = "H"
LABEL_LOWER = "L"
LABEL_UNCLASSIFIED = "U"


@dataclass(frozen=True)
class QuadratureSpec:
    """Monte-Carlo quadrature over the input-perturbation law.

    Node sets are a pure function of (run_seed, trial, candidate), so the same
    spec always draws the same nodes and the mean and spread estimates share
    one node set per candidate and trial.
    """

    sample_count: int = 1000
    run_seed: int = 0
    trial: int = 0
    candidate: int = 0

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")

    def for_candidate(self, trial: int, candidate: int) -> "QuadratureSpec":
        return replace(self, trial=trial, candidate=candidate)

    def draw(self, dist, x) -> np.ndarray:
        rng = stream_rng(self.run_seed, STREAM_QUADRATURE, self.trial, self.candidate)
        return input_models.sample(dist, x, rng, self.sample_count)


@dataclass(frozen=True)
class ReliabilityEstimate:
    """Interval summary for one candidate: mean, spread, and credible bounds."""

    mu_p: float
    gamma: float
    lower: float
    upper: float
    label: str | None = None


@dataclass(frozen=True)
class ClassificationState:
    """Per-candidate labels; H, L, U always partition the candidate set."""

    labels: tuple

    @property
    def h_count(self) -> int:
        return self.labels.count(LABEL_UPPER)

    @property
    def l_count(self) -> int:
        return self.labels.count(LABEL_LOWER)

    @property
    def u_count(self) -> int:
        return self.labels.count(LABEL_UNCLASSIFIED)

    def indices(self, label: str) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.labels) == label)


def prob_below(gp: GpPosterior, h: float, points) -> float | np.ndarray:
    """Posterior probability that f is below ``h`` at each point: Phi((h-mu)/sigma)."""
    mu, var = gp.posterior(points)
    return ndtr((h - mu) / np.sqrt(var))


def mean_reliability(gp: GpPosterior, dist, x, h: float, quad: QuadratureSpec) -> float:
    """Quadrature estimate of the expected reliability at candidate ``x``."""
    nodes = quad.draw(dist, x)
    return float(np.mean(prob_below(gp, h, nodes)))


def reliability_variance(gp: GpPosterior, dist, x, h: float, quad: QuadratureSpec) -> float:
    """Quadrature estimate of the integrated indicator variance (in [0, 1/4])."""
    nodes = quad.draw(dist, x)
    phi = prob_below(gp, h, nodes)
    return float(np.mean(phi * (1.0 - phi)))


def _estimate_from_phi(phi: np.ndarray, beta_sqrt: float) -> ReliabilityEstimate:
    mu = float(np.mean(phi))
    gamma = float(np.sqrt(np.mean(phi * (1.0 - phi))))
    return ReliabilityEstimate(
        mu_p=mu,
        gamma=gamma,
        lower=mu - beta_sqrt * gamma,
        upper=mu + beta_sqrt * gamma,
    )


def estimate(gp: GpPosterior, dist, x, h: float, quad: QuadratureSpec, beta_sqrt: float) -> ReliabilityEstimate:
    """Credible-interval estimate for one candidate (mean and spread share nodes)."""
    nodes = quad.draw(dist, x)
    return _estimate_from_phi(prob_below(gp, h, nodes), beta_sqrt)


def sweep(gp: GpPosterior, dist, candidates: np.ndarray, h: float, quad: QuadratureSpec,
          trial: int, beta_sqrt: float):
    """Estimates for every candidate at one trial, in one batched posterior query.

    Returns
    -------
    estimates : list of ReliabilityEstimate
    nodes : list of (M, d) arrays, the quadrature nodes per candidate
    phi : list of (M,) arrays, the below-threshold probabilities at the nodes
    """
    candidates = np.atleast_2d(candidates)
    node_blocks = [
        quad.for_candidate(trial, i).draw(dist, candidates[i])
        for i in range(candidates.shape[0])
    ]
    stacked = np.vstack(node_blocks)
    phi_all = prob_below(gp, h, stacked)
    m = quad.sample_count
    phi_blocks = [phi_all[i * m : (i + 1) * m] for i in range(candidates.shape[0])]
    estimates = [_estimate_from_phi(phi, beta_sqrt) for phi in phi_blocks]
    return estimates, node_blocks, phi_blocks


def classify(estimates, alpha: float, epsilon: float) -> ClassificationState:
    """Label each candidate H, L, or U from its credible interval.

    H wins when both rules fire (possible only for intervals narrower than
    the 2*epsilon band).
    """
    if not (0 < alpha < 1):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    labels = []
    for est in estimates:
        if est.lower > alpha - epsilon:
            labels.append(LABEL_UPPER)
        elif est.upper <= alpha + epsilon:
            labels.append(LABEL_LOWER)
        else:
            labels.append(LABEL_UNCLASSIFIED)
    return ClassificationState(labels=tuple(labels))


def misclassification_loss(truth: np.ndarray, labels, alpha: float) -> np.ndarray:
    """Loss per candidate: exceedance of the level on the wrong side, else 0.

    Candidates labeled L pay ``max(0, p* - alpha)``, candidates labeled H pay
    ``max(0, alpha - p*)``; unclassified candidates pay nothing.
    """
    truth = np.asarray(truth, dtype=float)
    labels = np.asarray(labels)
    loss = np.zeros(truth.shape[0])
    low = labels == LABEL_LOWER
    high = labels == LABEL_UPPER
    loss[low] = np.maximum(0.0, truth[low] - alpha)
    loss[high] = np.maximum(0.0, alpha - truth[high])
    return loss
