"""Independent oracles used by the unit and acceptance tests.

Everything here is implemented without reference to the package code so
the tests compare two independent derivations of the same quantity.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate


def kl_mc_estimate(mean, std, n_samples: int, rng: np.random.Generator):
    """Monte-Carlo estimate of KL(N(mean, diag std^2) || N(0, I)).

    Returns (estimate, standard_error). The integrand is the pointwise
    log-density ratio evaluated at samples from q.
    """
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    d = mean.shape[0]
    z = rng.standard_normal((n_samples, d)) * std + mean
    log_q = -0.5 * (((z - mean) / std) ** 2).sum(axis=1) - np.log(std).sum()
    log_p = -0.5 * (z ** 2).sum(axis=1)
    values = log_q - log_p
    return values.mean(), values.std(ddof=1) / math.sqrt(n_samples)


def bhattacharyya_1d_quadrature(mu_a, std_a, mu_b, std_b) -> float:
    """-ln integral sqrt(p q) for two 1-D Gaussians, by numerical quadrature."""

    def integrand(x):
        log_p = -0.5 * ((x - mu_a) / std_a) ** 2 - math.log(
            std_a * math.sqrt(2 * math.pi))
        log_q = -0.5 * ((x - mu_b) / std_b) ** 2 - math.log(
            std_b * math.sqrt(2 * math.pi))
        return math.exp(0.5 * (log_p + log_q))

    lo = min(mu_a - 12 * std_a, mu_b - 12 * std_b)
    hi = max(mu_a + 12 * std_a, mu_b + 12 * std_b)
    coeff, _err = integrate.quad(integrand, lo, hi, limit=200)
    return -math.log(coeff)


def simplex_projection(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    Independent sort-and-threshold derivation (Held et al. style): find
    the largest k with v_(k) - tau_k > 0 where tau_k is the running mean
    excess, then clip.
    """
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, len(v) + 1)
    cond = u - css / ks > 0
    k = ks[cond][-1]
    tau = css[k - 1] / k
    return np.maximum(v - tau, 0.0)


def rbf_kernel_matrix(x: np.ndarray, y: np.ndarray, bandwidth: float) -> np.ndarray:
    d2 = ((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-d2 / (2.0 * bandwidth ** 2))


def mmd_biased_np(x: np.ndarray, y: np.ndarray, bandwidth: float) -> float:
    """Biased squared MMD, plain numpy double-loop-free derivation."""
    kxx = rbf_kernel_matrix(x, x, bandwidth).mean()
    kyy = rbf_kernel_matrix(y, y, bandwidth).mean()
    kxy = rbf_kernel_matrix(x, y, bandwidth).mean()
    return kxx + kyy - 2.0 * kxy


def hsic_biased_np(x: np.ndarray, y: np.ndarray, bandwidth: float) -> float:
    m = x.shape[0]
    K = rbf_kernel_matrix(x, x, bandwidth)
    L = rbf_kernel_matrix(y, y, bandwidth)
    H = np.eye(m) - np.full((m, m), 1.0 / m)
    return float(np.trace(K @ H @ L @ H)) / (m - 1) ** 2
