"""Exact Gaussian-process regression with a zero prior mean.

The covariance is the Gaussian kernel ``sigma_f^2 * exp(-||a - b||^2 / L)``
plus i.i.d. observation noise.  Posteriors are immutable values:
``add_observation`` returns a new posterior backed by a rank-one extension of
the Cholesky factor, so a sequential loop pays O(t^2) per update instead of
O(t^3).  All query operations are pure and accept single points ``(d,)`` or
batches ``(n, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import cdist

# Fractions of the signal variance controlling numerical safeguards.
VARIANCE_FLOOR_FRACTION = 1e-12
JITTER_START_FRACTION = 1e-10
JITTER_MAX_FRACTION = 1e-4
DEGENERATE_COV_FRACTION = 1e-12


class GpConditioningError(RuntimeError):
    """Kernel matrix stayed non-positive-definite after maximum jitter."""


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel ``k(a, b) = signal_variance * exp(-||a-b||^2 / length_scale)``."""

    signal_variance: float
    length_scale: float

    def __post_init__(self):
        if not (self.signal_variance > 0):
            raise ValueError(f"signal_variance must be positive, got {self.signal_variance}")
        if not (self.length_scale > 0):
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Cross-covariance matrix between row-point arrays ``a`` and ``b``."""
        sq = cdist(np.atleast_2d(a), np.atleast_2d(b), "sqeuclidean")
        return self.signal_variance * np.exp(-sq / self.length_scale)


def kernel_eval(a, b, spec: KernelSpec) -> float:
    """Kernel value between two single points."""
    a = np.asarray(a, dtype=float).reshape(1, -1)
    b = np.asarray(b, dtype=float).reshape(1, -1)
    return float(spec.matrix(a, b)[0, 0])


@dataclass(frozen=True)
class OneStepAhead:
    """Posterior at a probe point after conditioning on a hypothetical observation.

    The fantasy mean is linear in the hypothetical observed value:
    ``base_mean + slope * (y_star - star_mean)``, with y*-independent standard
    deviation ``conditional_sd``.
    """

    slope: float
    conditional_sd: float
    base_mean: float
    star_mean: float
    star_predictive_var: float

    def fantasy_mean(self, y_star: float) -> float:
        return self.base_mean + self.slope * (y_star - self.star_mean)

    @property
    def fantasy_var(self) -> float:
        return self.conditional_sd**2


def _chol_with_jitter(c: np.ndarray, signal_variance: float, initial_jitter: float):
    """Cholesky of ``c + jitter*I``, escalating jitter tenfold on failure."""
    ladder = [initial_jitter]
    j = max(initial_jitter, JITTER_START_FRACTION * signal_variance)
    while j <= JITTER_MAX_FRACTION * signal_variance * (1 + 1e-12):
        if j > initial_jitter:
            ladder.append(j)
        j *= 10.0
    eye = np.eye(c.shape[0])
    for jitter in ladder:
        try:
            return np.linalg.cholesky(c + jitter * eye), jitter
        except np.linalg.LinAlgError:
            continue
    raise GpConditioningError(
        f"kernel matrix of size {c.shape[0]} not positive definite even with "
        f"jitter {JITTER_MAX_FRACTION:g} * signal_variance"
    )


class GpPosterior:
    """GP posterior over f given noisy observations at arbitrary points.

    Parameters
    ----------
    kernel : KernelSpec
    noise_variance : float
        Observation noise variance (> 0).
    inputs, outputs : array_like, optional
        Training points ``(t, d)`` and values ``(t,)``; omit both for the prior.
    """

    def __init__(self, kernel: KernelSpec, noise_variance: float, inputs=None, outputs=None):
        if not (noise_variance > 0):
            raise ValueError(f"noise_variance must be positive, got {noise_variance}")
        self.kernel = kernel
        self.noise_variance = float(noise_variance)
        if inputs is None or len(inputs) == 0:
            self.inputs = None
            self.outputs = np.empty(0)
            self.chol = None
            self.jitter = 0.0
            self._alpha = np.empty(0)
        else:
            x = np.atleast_2d(np.asarray(inputs, dtype=float))
            y = np.asarray(outputs, dtype=float).ravel()
            if x.shape[0] != y.shape[0]:
                raise ValueError("inputs and outputs length mismatch")
            c = kernel.matrix(x, x) + noise_variance * np.eye(x.shape[0])
            chol, jitter = _chol_with_jitter(c, kernel.signal_variance, 0.0)
            self.inputs = x
            self.outputs = y
            self.chol = chol
            self.jitter = jitter
            self._alpha = self._solve_chol(y)

    # internal constructor bypassing the batch build
    @classmethod
    def _from_factor(cls, kernel, noise_variance, inputs, outputs, chol, jitter):
        gp = cls.__new__(cls)
        gp.kernel = kernel
        gp.noise_variance = float(noise_variance)
        gp.inputs = inputs
        gp.outputs = outputs
        gp.chol = chol
        gp.jitter = jitter
        gp._alpha = gp._solve_chol(outputs)
        return gp

    @property
    def size(self) -> int:
        return 0 if self.inputs is None else self.inputs.shape[0]

    @property
    def variance_floor(self) -> float:
        return VARIANCE_FLOOR_FRACTION * self.kernel.signal_variance

    def _solve_chol(self, b: np.ndarray) -> np.ndarray:
        z = solve_triangular(self.chol, b, lower=True, check_finite=False)
        return solve_triangular(self.chol.T, z, lower=False, check_finite=False)

    def _whitened_cross(self, q: np.ndarray) -> np.ndarray:
        """L^{-1} K(train, q); columns give the variance reduction at q."""
        k = self.kernel.matrix(self.inputs, q)
        return solve_triangular(self.chol, k, lower=True, check_finite=False)

    def posterior(self, x):
        """Posterior mean and variance at ``x``.

        Accepts one point ``(d,)`` (returns two floats) or a batch ``(n, d)``
        (returns two ``(n,)`` arrays).  Variance is clamped to
        ``[floor, signal_variance]`` so downstream normal CDF arguments stay
        finite.
        """
        q = np.asarray(x, dtype=float)
        single = q.ndim == 1
        q = np.atleast_2d(q)
        sf2 = self.kernel.signal_variance
        if self.inputs is None:
            mean = np.zeros(q.shape[0])
            var = np.full(q.shape[0], sf2)
        else:
            k = self.kernel.matrix(self.inputs, q)
            v = solve_triangular(self.chol, k, lower=True, check_finite=False)
            mean = k.T @ self._alpha
            var = sf2 - np.einsum("ij,ij->j", v, v)
        var = np.clip(var, self.variance_floor, sf2)
        if single:
            return float(mean[0]), float(var[0])
        return mean, var

    def posterior_cov(self, x, x2):
        """Posterior covariance; floats for single points, ``(n, m)`` for batches."""
        a = np.asarray(x, dtype=float)
        b = np.asarray(x2, dtype=float)
        single = a.ndim == 1 and b.ndim == 1
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        cov = self.kernel.matrix(a, b)
        if self.inputs is not None:
            va = self._whitened_cross(a)
            vb = self._whitened_cross(b)
            cov = cov - va.T @ vb
        if single:
            return float(cov[0, 0])
        return cov

    def add_observation(self, s, y: float) -> "GpPosterior":
        """New posterior including ``(s, y)``; equals a batch refit on the extended data."""
        s = np.asarray(s, dtype=float).reshape(1, -1)
        if self.inputs is None:
            return GpPosterior(self.kernel, self.noise_variance, s, np.array([float(y)]))
        x_new = np.vstack([self.inputs, s])
        y_new = np.append(self.outputs, float(y))
        cross = self.kernel.matrix(self.inputs, s)[:, 0]
        diag = self.kernel.signal_variance + self.noise_variance + self.jitter
        row = solve_triangular(self.chol, cross, lower=True, check_finite=False)
        pivot_sq = diag - row @ row
        if pivot_sq <= diag * 1e-15:
            # extension lost positive definiteness; rebuild with more jitter
            next_jitter = max(self.jitter * 10.0, JITTER_START_FRACTION * self.kernel.signal_variance)
            c = self.kernel.matrix(x_new, x_new) + self.noise_variance * np.eye(x_new.shape[0])
            chol, jitter = _chol_with_jitter(c, self.kernel.signal_variance, next_jitter)
        else:
            t = self.size
            chol = np.zeros((t + 1, t + 1))
            chol[:t, :t] = self.chol
            chol[t, :t] = row
            chol[t, t] = np.sqrt(pivot_sq)
            jitter = self.jitter
        return GpPosterior._from_factor(self.kernel, self.noise_variance, x_new, y_new, chol, jitter)

    def one_step_ahead(self, s_bar, s_star) -> OneStepAhead:
        """One-step-ahead ("fantasy") posterior at ``s_bar`` given a pending
        observation at ``s_star``, without committing to an observed value."""
        s_bar = np.asarray(s_bar, dtype=float)
        s_star = np.asarray(s_star, dtype=float)
        mu_bar, var_bar = self.posterior(s_bar)
        mu_star, var_star = self.posterior(s_star)
        k_bs = self.posterior_cov(s_bar, s_star)
        c = var_star + self.noise_variance
        cond_var = max(var_bar - k_bs**2 / c, 0.0)
        return OneStepAhead(
            slope=k_bs / c,
            conditional_sd=float(np.sqrt(cond_var)),
            base_mean=mu_bar,
            star_mean=mu_star,
            star_predictive_var=c,
        )
