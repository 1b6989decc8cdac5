"""Independent oracles: exhaustive binomial-tree dynamic programming and quadrature."""

import math

import numpy as np
from scipy.integrate import quad


def _tree_paths(params, n, substeps):
    """All 2^(n*substeps) paths of a +-sqrt(h) random walk, first step most significant."""
    steps = n * substeps
    h = params.horizon / steps
    bits = (np.arange(2 ** steps)[:, None] >> np.arange(steps - 1, -1, -1)[None, :]) & 1
    dw = np.where(bits == 1, 1.0, -1.0) * math.sqrt(h)
    w = np.concatenate([np.zeros((len(dw), 1)), np.cumsum(dw, axis=1)], axis=1)
    t = np.arange(steps + 1) * h
    return t, w, h


def _sell_reward_on_tree(params, n, substeps):
    t, w, h = _tree_paths(params, n, substeps)
    s2 = params.sigma ** 2
    log_rel = params.sigma * w - 0.5 * s2 * t
    x = params.x0 * np.exp(log_rel)
    mu0 = params.mu0
    weight = np.exp(0.5 * (mu0 - mu0 * mu0 / s2) * t - params.lam * t) * np.exp(mu0 / s2 * log_rel)
    for u, p in zip(params.mus, params.probs):
        rate = 0.5 * (mu0 - u - (mu0 * mu0 - u * u) / s2) - params.lam
        f = params.lam * np.exp(rate * t + (mu0 - u) / s2 * log_rel)
        r = np.concatenate([np.zeros((len(f), 1)),
                            np.cumsum(0.5 * h * (f[:, 1:] + f[:, :-1]), axis=1)], axis=1)
        lu = np.exp(0.5 * (u - u * u / s2) * t + u / s2 * log_rel)
        weight = weight + p * lu * r
    return x * weight


def _cond_mean(v, level, steps):
    """E[v | first `level` steps] on the full tree, broadcast back to every path."""
    groups = v.reshape(2 ** level, 2 ** (steps - level))
    return np.repeat(groups.mean(axis=1), 2 ** (steps - level))


def tree_solution(params, n, substeps=1):
    """Exact buy-then-sell dynamic program on the tree.

    Decisions at decision nodes k = 1..n-1, forced sell at n. Returns the
    value at t_1 averaged from t_0, and per-path optimal sell/buy indices.
    """
    steps = n * substeps
    sell = _sell_reward_on_tree(params, n, substeps)
    v1 = sell[:, steps].copy()
    v2 = np.zeros_like(v1)
    tau2 = np.full(len(v1), n)
    tau1 = np.full(len(v1), n)
    stop2_at = {}
    stop1_at = {}
    for j in range(steps - 1, substeps - 1, -1):
        c1 = _cond_mean(v1, j, steps)
        c2 = _cond_mean(v2, j, steps)
        if j % substeps == 0:
            k = j // substeps
            s = sell[:, j]
            stop2_at[k] = s > c1
            v1 = np.maximum(s, c1)
            buy = -s + v1
            stop1_at[k] = buy > c2
            v2 = np.maximum(buy, c2)
        else:
            v1, v2 = c1, c2
    value = max(float(np.mean(v2)), 0.0)
    for k in range(n - 1, 0, -1):
        tau2 = np.where(stop2_at[k], k, tau2)
    holding = np.ones(len(v1), dtype=bool)
    for k in range(1, n):
        now = holding & stop1_at[k]
        tau1 = np.where(now, k, tau1)
        holding &= ~now
    return value, tau1, tau2


def expected_price(params, t):
    """Physical-measure E[X(t)] by quadrature over the change time."""
    def integrand(s):
        post = sum(p * math.exp(u * (t - s)) for u, p in zip(params.mus, params.probs))
        return params.lam * math.exp(-params.lam * s) * math.exp(params.mu0 * s) * post

    return params.x0 * (math.exp((params.mu0 - params.lam) * t) + quad(integrand, 0.0, t)[0])
