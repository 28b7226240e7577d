"""Reliable level-set estimation under input uncertainty.

Active learning for classifying candidate inputs by whether an expensive
black-box function, evaluated at randomly perturbed inputs, stays below a
threshold with sufficiently high probability.
"""

from .acquisition import entry_threshold, improvement_score, mile, straddle
from .engine import AlgorithmConfig, ExplorationSchedule, RunResult, TrialRecord, run
from .gp import GpPosterior, KernelSpec, kernel_eval
from .input_models import (
    EstimatedShift,
    GammaShift,
    GaussianShift,
    ProductIndependent,
)
from .reliability import QuadratureSpec, ReliabilityEstimate, classify

__version__ = "0.1.0"

__all__ = [
    "AlgorithmConfig",
    "EstimatedShift",
    "ExplorationSchedule",
    "GammaShift",
    "GaussianShift",
    "GpPosterior",
    "KernelSpec",
    "ProductIndependent",
    "QuadratureSpec",
    "ReliabilityEstimate",
    "RunResult",
    "TrialRecord",
    "classify",
    "entry_threshold",
    "improvement_score",
    "kernel_eval",
    "mile",
    "run",
    "straddle",
]
