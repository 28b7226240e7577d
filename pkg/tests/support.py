"""Independent oracles shared across test modules.

Everything here deliberately avoids the library's computational paths:
posteriors come from dense numpy solves, integrals from explicit quadrature,
roots from bisection.
"""

import numpy as np
from scipy.stats import norm

from iurlse.gp import GpPosterior, KernelSpec


def random_gp(rng, dim=1, n_points=5, signal_variance=None, length_scale=None,
              noise_variance=None, span=2.0):
    """A GP posterior on random data, for randomized comparisons."""
    sf2 = signal_variance if signal_variance is not None else float(rng.uniform(0.5, 50.0))
    ls = length_scale if length_scale is not None else float(rng.uniform(0.3, 2.0))
    nv = noise_variance if noise_variance is not None else float(rng.uniform(1e-4, 0.05))
    x = rng.uniform(-span, span, size=(n_points, dim))
    y = rng.normal(0.0, np.sqrt(sf2), size=n_points)
    return GpPosterior(KernelSpec(sf2, ls), nv, x, y)


def dense_posterior(kernel: KernelSpec, noise_variance, x_train, y_train, query):
    """Posterior mean/variance from the textbook dense formulas."""
    x_train = np.atleast_2d(x_train)
    query = np.atleast_2d(query)
    c = kernel.matrix(x_train, x_train) + noise_variance * np.eye(x_train.shape[0])
    kq = kernel.matrix(x_train, query)
    sol = np.linalg.solve(c, kq)
    mean = sol.T @ np.asarray(y_train, dtype=float)
    var = kernel.signal_variance - np.einsum("ij,ij->j", kq, sol)
    return mean, var


def dense_posterior_cov(kernel: KernelSpec, noise_variance, x_train, a, b):
    x_train = np.atleast_2d(x_train)
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    c = kernel.matrix(x_train, x_train) + noise_variance * np.eye(x_train.shape[0])
    ka = kernel.matrix(x_train, a)
    kb = kernel.matrix(x_train, b)
    return kernel.matrix(a, b) - ka.T @ np.linalg.solve(c, kb)


def quadrature_upper_term(gp: GpPosterior, s_bar, s_star, h, c, n_nodes=20_000):
    """Numerical value of the per-representative acquisition term.

    Integrates the gate indicator over the unseen observation by placing one
    node per equal slice of predictive probability mass; the fantasy posterior
    comes from a dense refit, independent of the incremental code path.
    """
    x_train, y_train = gp.inputs, gp.outputs
    k = gp.kernel.matrix
    nv = gp.noise_variance
    s_bar = np.atleast_2d(np.asarray(s_bar, dtype=float))
    s_star = np.atleast_2d(np.asarray(s_star, dtype=float))

    c_t = k(x_train, x_train) + nv * np.eye(len(y_train))
    ks = k(x_train, s_star)[:, 0]
    sol = np.linalg.solve(c_t, np.column_stack([np.asarray(y_train, dtype=float), ks]))
    mu_star = ks @ sol[:, 0]
    pred_var = gp.kernel.signal_variance - ks @ sol[:, 1] + nv

    extended = np.vstack([x_train, s_star])
    c_new = k(extended, extended) + nv * np.eye(len(y_train) + 1)
    k_new = k(extended, s_bar)[:, 0]
    w = np.linalg.solve(c_new, k_new)
    sd_new = np.sqrt(max(gp.kernel.signal_variance - k_new @ w, 1e-300))
    base = w[:-1] @ y_train

    u = (np.arange(n_nodes) + 0.5) / n_nodes
    y_nodes = mu_star + np.sqrt(pred_var) * norm.ppf(u)
    fantasy_mean = base + w[-1] * y_nodes
    gate_open = norm.cdf((h - fantasy_mean) / sd_new) > c
    return float(np.mean(gate_open))


def bisect_entry_threshold(alpha_eff, beta_sqrt, tol=1e-13):
    """Root of Phi - beta_sqrt*sqrt(Phi(1-Phi)) = alpha_eff on (alpha_eff, 1]."""
    def g(p):
        return p - beta_sqrt * np.sqrt(p * (1.0 - p)) - alpha_eff

    lo, hi = alpha_eff, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)
