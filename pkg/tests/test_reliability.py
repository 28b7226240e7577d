import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from iurlse import reliability as rel
from iurlse.benchlab import get_benchmark, oracle_table
from iurlse.gp import GpPosterior, KernelSpec
from iurlse.input_models import GaussianShift

PHI_08 = norm.cdf(0.8)


def prior_gp(sf2=100.0, ls=0.5, noise=1e-4):
    return GpPosterior(KernelSpec(sf2, ls), noise)


class TestProbBelow:
    def test_centered_at_mean(self):
        gp = GpPosterior(KernelSpec(1.0, 1.0), 1e-4, [[0.0]], [2.0])
        mean, _ = gp.posterior(np.array([0.0]))
        assert rel.prob_below(gp, mean, np.array([0.0])) == pytest.approx(0.5, abs=1e-12)

    def test_prior_value(self):
        assert rel.prob_below(prior_gp(), 8.0, np.array([1.0])) == pytest.approx(PHI_08, rel=1e-12)

    def test_deep_tail_saturates(self):
        gp = GpPosterior(KernelSpec(1.0, 1.0), 1e-4, [[0.0]], [0.0])
        mean, var = gp.posterior(np.array([0.0]))
        h = mean + 10.0 * np.sqrt(var)
        assert 1.0 - rel.prob_below(gp, h, np.array([0.0])) < 1e-23


class TestQuadratureEstimates:
    dist = GaussianShift(offsets=(0.0,), sds=(0.07,))

    def test_saturated_posterior_gives_one(self):
        # prior mean 0 far below a huge threshold: below-probability is 1 everywhere
        gp = prior_gp(sf2=1.0, ls=1.0)
        quad = rel.QuadratureSpec(sample_count=500, run_seed=1)
        assert rel.mean_reliability(gp, self.dist, np.array([0.0]), 100.0, quad) == pytest.approx(1.0, abs=1e-12)
        assert rel.reliability_variance(gp, self.dist, np.array([0.0]), 100.0, quad) == pytest.approx(0.0, abs=1e-12)

    def test_prior_reduces_to_constant_integrand(self):
        quad = rel.QuadratureSpec(sample_count=700, run_seed=2)
        mu = rel.mean_reliability(prior_gp(), self.dist, np.array([2.0]), 8.0, quad)
        var = rel.reliability_variance(prior_gp(), self.dist, np.array([2.0]), 8.0, quad)
        assert mu == pytest.approx(PHI_08, abs=1e-12)
        assert var == pytest.approx(PHI_08 * (1 - PHI_08), abs=1e-12)
        assert var == pytest.approx(0.16700, abs=5e-5)

    def test_constant_half_gives_max_variance(self):
        gp = prior_gp(sf2=1.0)
        quad = rel.QuadratureSpec(sample_count=100, run_seed=3)
        assert rel.reliability_variance(gp, self.dist, np.array([0.0]), 0.0, quad) == pytest.approx(0.25, abs=1e-12)

    def test_dense_data_matches_ground_truth(self):
        bench = get_benchmark("quartic1d")
        xs = np.linspace(-0.5, 5.5, 50)[:, None]
        rngs = np.random.default_rng(4)
        ys = bench(xs) + 1e-2 * rngs.normal(size=50)
        gp = GpPosterior(bench.kernel, bench.noise_variance, xs, ys)
        quad = rel.QuadratureSpec(sample_count=2000, run_seed=5)
        mu = rel.mean_reliability(gp, self.dist, np.array([2.0]), 8.0, quad)
        truth = oracle_table(bench, self.dist, np.array([[2.0]]), 8.0, 100_000, seed=6).values[0]
        assert abs(mu - truth) < 0.02

    def test_mean_and_variance_share_nodes(self):
        # deterministic node reuse: moments computed separately stay consistent
        gp = prior_gp()
        quad = rel.QuadratureSpec(sample_count=50, run_seed=9, trial=3, candidate=7)
        est = rel.estimate(gp, self.dist, np.array([1.0]), 8.0, quad, beta_sqrt=3.0)
        mu = rel.mean_reliability(gp, self.dist, np.array([1.0]), 8.0, quad)
        var = rel.reliability_variance(gp, self.dist, np.array([1.0]), 8.0, quad)
        assert est.mu_p == mu
        assert est.gamma == np.sqrt(var)
        assert est.lower == mu - 3.0 * est.gamma
        assert est.upper == mu + 3.0 * est.gamma

    def test_sweep_matches_per_candidate_estimates(self):
        bench = get_benchmark("quartic1d")
        rng = np.random.default_rng(11)
        pts = rng.uniform(-0.5, 5.5, size=(6, 1))
        gp = GpPosterior(bench.kernel, bench.noise_variance, pts, bench(pts))
        candidates = bench.grid()[::8]
        quad = rel.QuadratureSpec(sample_count=64, run_seed=12)
        estimates, nodes, phi = rel.sweep(gp, self.dist, candidates, 8.0, quad, trial=4, beta_sqrt=3.0)
        for i, est in enumerate(estimates):
            single = rel.estimate(
                gp, self.dist, candidates[i], 8.0, quad.for_candidate(4, i), beta_sqrt=3.0
            )
            assert est == single
            assert nodes[i].shape == (64, 1)
            assert phi[i].shape == (64,)

    def test_bitwise_determinism(self):
        gp = prior_gp()
        quad = rel.QuadratureSpec(sample_count=128, run_seed=99, trial=2, candidate=5)
        a = rel.estimate(gp, self.dist, np.array([1.0]), 8.0, quad, 3.0)
        b = rel.estimate(gp, self.dist, np.array([1.0]), 8.0, quad, 3.0)
        assert a == b


class TestClassify:
    def _est(self, lower, upper):
        mid = 0.5 * (lower + upper)
        return rel.ReliabilityEstimate(mu_p=mid, gamma=(upper - lower) / 2, lower=lower, upper=upper)

    def test_clear_upper(self):
        state = rel.classify([self._est(0.99, 1.0)], alpha=0.95, epsilon=0.0)
        assert state.labels == ("H",)

    def test_clear_lower(self):
        state = rel.classify([self._est(0.10, 0.90)], alpha=0.95, epsilon=0.0)
        assert state.labels == ("L",)

    def test_unclassified(self):
        state = rel.classify([self._est(0.90, 0.99)], alpha=0.95, epsilon=0.0)
        assert state.labels == ("U",)

    def test_upper_wins_when_both_rules_fire(self):
        # interval inside the 2*epsilon band triggers both rules; H is checked first
        state = rel.classify([self._est(0.94, 0.96)], alpha=0.95, epsilon=0.05)
        assert state.labels == ("H",)

    def test_counts_partition(self):
        ests = [self._est(0.99, 1.0), self._est(0.1, 0.9), self._est(0.9, 0.99)]
        state = rel.classify(ests, alpha=0.95, epsilon=0.0)
        assert state.h_count + state.l_count + state.u_count == 3
        assert list(state.indices("H")) == [0]

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            rel.classify([], alpha=1.2, epsilon=0.0)
        with pytest.raises(ValueError):
            rel.classify([], alpha=0.5, epsilon=-0.1)

    @given(
        mu=st.floats(0.0, 1.0),
        gamma=st.floats(0.0, 0.5),
        beta_small=st.floats(0.0, 5.0),
        beta_extra=st.floats(0.0, 5.0),
        alpha=st.floats(0.05, 0.95),
        epsilon=st.floats(0.0, 0.2),
    )
    @settings(max_examples=200, deadline=None)
    def test_widening_interval_never_classifies_more(self, mu, gamma, beta_small, beta_extra, alpha, epsilon):
        def est(beta_sqrt):
            return rel.ReliabilityEstimate(
                mu_p=mu, gamma=gamma, lower=mu - beta_sqrt * gamma, upper=mu + beta_sqrt * gamma
            )

        narrow = rel.classify([est(beta_small)], alpha, epsilon).labels[0]
        wide = rel.classify([est(beta_small + beta_extra)], alpha, epsilon).labels[0]
        if narrow == "U":
            assert wide == "U"


class TestMisclassificationLoss:
    def test_correct_upper_has_no_loss(self):
        loss = rel.misclassification_loss(np.array([0.99]), ["H"], alpha=0.95)
        assert loss[0] == 0.0

    def test_wrongly_lowered_pays_excess(self):
        loss = rel.misclassification_loss(np.array([0.99]), ["L"], alpha=0.95)
        assert loss[0] == pytest.approx(0.04, abs=1e-12)

    def test_wrongly_raised_pays_shortfall(self):
        loss = rel.misclassification_loss(np.array([0.50]), ["H"], alpha=0.95)
        assert loss[0] == pytest.approx(0.45, abs=1e-12)

    def test_unclassified_pays_nothing(self):
        loss = rel.misclassification_loss(np.array([0.5, 0.99]), ["U", "U"], alpha=0.95)
        assert np.all(loss == 0.0)

    @given(
        p=st.floats(0.0, 1.0),
        alpha=st.floats(0.05, 0.95),
        label=st.sampled_from(["H", "L", "U"]),
    )
    @settings(max_examples=200, deadline=None)
    def test_loss_is_bounded_and_onesided(self, p, alpha, label):
        loss = rel.misclassification_loss(np.array([p]), [label], alpha)[0]
        assert 0.0 <= loss <= 1.0
        if label == "H" and p > alpha:
            assert loss == 0.0
        if label == "L" and p <= alpha:
            assert loss == 0.0


def test_estimate_bounds_hold_on_random_posteriors():
    rng = np.random.default_rng(42)
    dist = GaussianShift(offsets=(0.0,), sds=(0.3,))
    for k in range(20):
        pts = rng.uniform(-2, 2, size=(4, 1))
        gp = GpPosterior(KernelSpec(10.0, 0.7), 1e-3, pts, rng.normal(0, 3, size=4))
        quad = rel.QuadratureSpec(sample_count=200, run_seed=k)
        est = rel.estimate(gp, dist, rng.uniform(-2, 2, size=1), float(rng.normal(0, 3)), quad, 3.0)
        assert 0.0 <= est.mu_p <= 1.0
        assert 0.0 <= est.gamma**2 <= 0.25
        assert est.lower <= est.mu_p <= est.upper
