"""Input-perturbation laws: the distribution of the executed input S(x).

All supported laws are shift families, ``S(x) = x + W`` with ``W`` independent
of ``x``, which is what lets one batch of shift deviates be shared across many
candidates (common random numbers).  Shifts are never clipped to the candidate
box: the surrogate and the true functions are defined wherever a perturbation
may land, and clipping would distort the law.

Unknown shift parameters are handled conjugately: a normal prior for an
unknown mean offset (known variance) and a gamma prior for an unknown
precision (known mean), with closed-form posterior updates and predictive
densities (normal resp. Student-t).  The posteriors store running sufficient
statistics, so batch and sequential updates agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import stats


class MarginalDensityRequired(ValueError):
    """Raised when a plain density is requested from a distribution with
    unresolved parameters; use ``predictive_density`` instead."""


def _as_1d(values) -> np.ndarray:
    return np.asarray(values, dtype=float).ravel()


@dataclass(frozen=True)
class NormalMeanPosterior:
    """Conjugate posterior for an unknown mean offset with known observation variance.

    ``shift ~ N(mean_offset, obs_variance)`` with prior
    ``mean_offset ~ N(prior_mean, prior_variance)``.
    """

    prior_mean: float
    prior_variance: float
    obs_variance: float
    n_obs: int = 0
    shift_sum: float = 0.0

    def __post_init__(self):
        if self.prior_variance <= 0 or self.obs_variance <= 0:
            raise ValueError("prior_variance and obs_variance must be positive")

    @property
    def variance(self) -> float:
        return 1.0 / (1.0 / self.prior_variance + self.n_obs / self.obs_variance)

    @property
    def mean(self) -> float:
        weighted = self.prior_mean / self.prior_variance + self.shift_sum / self.obs_variance
        return weighted * self.variance

    def updated(self, values) -> "NormalMeanPosterior":
        values = _as_1d(values)
        total = self.shift_sum
        for v in values:  # sequential accumulation: batch == stepwise exactly
            total += v
        return replace(self, n_obs=self.n_obs + values.size, shift_sum=total)

    def predictive(self):
        """Predictive law of one future shift: frozen scipy distribution."""
        return stats.norm(loc=self.mean, scale=np.sqrt(self.obs_variance + self.variance))


@dataclass(frozen=True)
class GammaPrecisionPosterior:
    """Conjugate posterior for an unknown precision with known (zero) mean.

    ``shift ~ N(0, 1/precision)`` with prior ``precision ~ Gamma(prior_shape,
    rate=prior_rate)``.  Observed values must already be centered on the known
    mean.
    """

    prior_shape: float
    prior_rate: float
    n_obs: int = 0
    sq_sum: float = 0.0

    def __post_init__(self):
        if self.prior_shape <= 0 or self.prior_rate <= 0:
            raise ValueError("gamma shape and rate must be positive")

    @property
    def shape(self) -> float:
        return self.prior_shape + 0.5 * self.n_obs

    @property
    def rate(self) -> float:
        return self.prior_rate + 0.5 * self.sq_sum

    def updated(self, values) -> "GammaPrecisionPosterior":
        values = _as_1d(values)
        total = self.sq_sum
        for v in values:
            total += v * v
        return replace(self, n_obs=self.n_obs + values.size, sq_sum=total)

    def predictive(self):
        """Student-t predictive with 2*shape degrees of freedom."""
        return stats.t(df=2.0 * self.shape, loc=0.0, scale=np.sqrt(self.rate / self.shape))


XiPosterior = NormalMeanPosterior | GammaPrecisionPosterior


def update_xi(posterior: XiPosterior, observed_shifts) -> XiPosterior:
    """Conjugate update from realized shift values.

    For ``NormalMeanPosterior`` the values are direct noisy observations of
    the unknown offset; for ``GammaPrecisionPosterior`` they must be centered
    on the known mean.
    """
    return posterior.updated(observed_shifts)


@dataclass(frozen=True)
class GaussianShift:
    """Per-dimension independent normal shifts ``W_j ~ N(offset_j, sd_j^2)``."""

    offsets: tuple
    sds: tuple

    def __post_init__(self):
        object.__setattr__(self, "offsets", tuple(float(v) for v in np.atleast_1d(self.offsets)))
        object.__setattr__(self, "sds", tuple(float(v) for v in np.atleast_1d(self.sds)))
        if len(self.offsets) != len(self.sds):
            raise ValueError("offsets and sds must have equal length")
        if any(s < 0 for s in self.sds):
            raise ValueError("shift standard deviations must be nonnegative")

    @property
    def dim(self) -> int:
        return len(self.offsets)

    def sample_shifts(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(loc=self.offsets, scale=self.sds, size=(n, self.dim))

    def shift_density(self, w: np.ndarray) -> np.ndarray:
        if any(s == 0 for s in self.sds):
            raise ValueError("density undefined for a degenerate (zero sd) shift")
        z = (np.atleast_2d(w) - np.asarray(self.offsets)) / np.asarray(self.sds)
        norm = np.prod(self.sds) * (2 * np.pi) ** (self.dim / 2)
        return np.exp(-0.5 * np.sum(z * z, axis=-1)) / norm

    def mean_shift(self) -> np.ndarray:
        return np.asarray(self.offsets)


@dataclass(frozen=True)
class GammaShift:
    """Per-dimension independent gamma shifts ``W_j ~ Gamma(shape_j, scale=scale_j)``.

    The second parameter is a scale, so the mean shift is ``shape * scale``.
    """

    shapes: tuple
    scales: tuple

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(float(v) for v in np.atleast_1d(self.shapes)))
        object.__setattr__(self, "scales", tuple(float(v) for v in np.atleast_1d(self.scales)))
        if len(self.shapes) != len(self.scales):
            raise ValueError("shapes and scales must have equal length")
        if any(v <= 0 for v in self.shapes) or any(v <= 0 for v in self.scales):
            raise ValueError("gamma shapes and scales must be positive")

    @property
    def dim(self) -> int:
        return len(self.shapes)

    def sample_shifts(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.gamma(shape=self.shapes, scale=self.scales, size=(n, self.dim))

    def shift_density(self, w: np.ndarray) -> np.ndarray:
        w = np.atleast_2d(w)
        dens = np.ones(w.shape[0])
        for j in range(self.dim):
            dens *= stats.gamma.pdf(w[:, j], a=self.shapes[j], scale=self.scales[j])
        return dens

    def mean_shift(self) -> np.ndarray:
        return np.asarray(self.shapes) * np.asarray(self.scales)


@dataclass(frozen=True)
class EstimatedShift:
    """One-dimensional shift law with a partially unknown parameter.

    ``base_offset`` is the known part of the shift; the unknown part is
    described by the conjugate posterior ``xi``.  Sampling uses the current
    predictive law (the parameter-marginalized shift density), so the object
    always behaves as the learner's best current model.
    """

    xi: XiPosterior
    base_offset: float = 0.0

    @property
    def dim(self) -> int:
        return 1

    def sample_shifts(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if isinstance(self.xi, NormalMeanPosterior):
            pred = self.xi.predictive()
            draws = rng.normal(loc=pred.mean(), scale=pred.std(), size=n)
        else:
            scale = np.sqrt(self.xi.rate / self.xi.shape)
            draws = rng.standard_t(df=2.0 * self.xi.shape, size=n) * scale
        return (self.base_offset + draws).reshape(n, 1)

    def shift_density(self, w: np.ndarray) -> np.ndarray:
        raise MarginalDensityRequired(
            "shift law has unresolved parameters; use predictive_density"
        )

    def predictive_shift_density(self, w: np.ndarray) -> np.ndarray:
        w = np.atleast_2d(w)[:, 0]
        return self.xi.predictive().pdf(w - self.base_offset)

    def mean_shift(self) -> np.ndarray:
        mean = self.xi.mean if isinstance(self.xi, NormalMeanPosterior) else 0.0
        return np.asarray([self.base_offset + mean])

    def observed(self, shift_values) -> "EstimatedShift":
        """New law with the unknown parameter updated from realized shifts."""
        centered = _as_1d(shift_values) - self.base_offset
        return replace(self, xi=update_xi(self.xi, centered))


@dataclass(frozen=True)
class ProductIndependent:
    """Product of independent one-dimensional shift laws, one per dimension."""

    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ValueError("at least one component required")
        if any(c.dim != 1 for c in self.components):
            raise ValueError("product components must be one-dimensional")

    @property
    def dim(self) -> int:
        return len(self.components)

    def sample_shifts(self, rng: np.random.Generator, n: int) -> np.ndarray:
        cols = [c.sample_shifts(rng, n).ravel() for c in self.components]
        return np.column_stack(cols)

    def shift_density(self, w: np.ndarray) -> np.ndarray:
        w = np.atleast_2d(w)
        dens = np.ones(w.shape[0])
        for j, c in enumerate(self.components):
            dens *= c.shift_density(w[:, j : j + 1])
        return dens

    def mean_shift(self) -> np.ndarray:
        return np.concatenate([c.mean_shift() for c in self.components])


InputDistribution = GaussianShift | GammaShift | EstimatedShift | ProductIndependent


def sample(dist: InputDistribution, x, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` i.i.d. draws of the executed input for requested input ``x``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.asarray(x, dtype=float).ravel()
    return x + dist.sample_shifts(rng, n)


def density(dist: InputDistribution, x, s) -> float | np.ndarray:
    """Density of the executed input at ``s``; vectorized over rows of ``s``.

    Raises ``MarginalDensityRequired`` for laws with unresolved parameters.
    """
    x = np.asarray(x, dtype=float).ravel()
    s = np.asarray(s, dtype=float)
    single = s.ndim == 1
    vals = dist.shift_density(np.atleast_2d(s) - x)
    return float(vals[0]) if single else vals


def marginal_shift_density(dist: InputDistribution, w: np.ndarray) -> np.ndarray:
    """Shift density with any unresolved parameters marginalized out."""
    w = np.atleast_2d(w)
    if isinstance(dist, EstimatedShift):
        return dist.predictive_shift_density(w)
    if isinstance(dist, ProductIndependent):
        dens = np.ones(w.shape[0])
        for j, c in enumerate(dist.components):
            col = w[:, j : j + 1]
            if isinstance(c, EstimatedShift):
                dens *= c.predictive_shift_density(col)
            else:
                dens *= c.shift_density(col)
        return dens
    return dist.shift_density(w)


def marginal_density(dist: InputDistribution, x, s) -> float | np.ndarray:
    """Like ``density`` but marginalizing any unresolved parameters."""
    x = np.asarray(x, dtype=float).ravel()
    s = np.asarray(s, dtype=float)
    single = s.ndim == 1
    vals = marginal_shift_density(dist, np.atleast_2d(s) - x)
    return float(vals[0]) if single else vals


def mean_point(dist: InputDistribution, x) -> np.ndarray:
    """Expected executed input ``E[S(x)]``."""
    return np.asarray(x, dtype=float).ravel() + dist.mean_shift()


def predictive_density(posterior: XiPosterior, template: EstimatedShift, x, s) -> float | np.ndarray:
    """Parameter-marginalized density of the executed input under ``posterior``.

    ``template`` supplies the known part of the shift law; its own posterior
    state is ignored in favor of the one passed in.
    """
    return marginal_density(replace(template, xi=posterior), x, s)


def update_with_shift(dist: InputDistribution, shift) -> InputDistribution:
    """Fold one realized shift vector into any estimated components."""
    shift = _as_1d(shift)
    if isinstance(dist, EstimatedShift):
        return dist.observed(shift)
    if isinstance(dist, ProductIndependent):
        new = tuple(
            c.observed(shift[j : j + 1]) if isinstance(c, EstimatedShift) else c
            for j, c in enumerate(dist.components)
        )
        if any(a is not b for a, b in zip(new, dist.components)):
            return ProductIndependent(new)
    return dist
