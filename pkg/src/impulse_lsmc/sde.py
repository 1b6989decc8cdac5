"""Path simulation under the reference and the physical measure.

Under the reference measure the price is a driftless GBM, so the state is
stepped exactly in log space. The likelihood ratios L(t; u) have a closed
form in X(t); the weighted integrals R(t; u) use the trapezoidal rule on the
simulation nodes.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import rng
from .model import ModelParams


@dataclass(frozen=True)
class TimeGrid:
    n_steps: int
    horizon: float

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @cached_property
    def times(self) -> np.ndarray:
        return self.horizon * np.arange(self.n_steps + 1) / self.n_steps

    def refined(self, substeps: int) -> "TimeGrid":
        return TimeGrid(self.n_steps * substeps, self.horizon)


@dataclass(frozen=True)
class PathBundle:
    """Reference-measure paths on the decision grid.

    Shapes: ``x`` and ``zpost`` are (M, n+1), ``l`` is (M, m+1, n+1) with the
    pre-change regime at index 0, ``r`` is (M, m, n+1).
    """

    grid: TimeGrid
    x: np.ndarray
    l: np.ndarray
    r: np.ndarray
    zpost: np.ndarray
    seed: int
    substeps: int = 1

    @property
    def m_paths(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.r.shape[1]


@dataclass(frozen=True)
class PhysicalPaths:
    """Physical-measure price paths with the latent change time and level of each path."""

    grid: TimeGrid
    x: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    seed: int

    @property
    def m_paths(self) -> int:
        return self.x.shape[0]


def _map_blocks(fn, m_paths: int, threads: int):
    spans = list(rng.blocks(m_paths))
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda s: fn(*s), spans))
    return [fn(*s) for s in spans]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def likelihood_ratio(t, log_rel, u: float, params: ModelParams):
    """L(t; u) = exp{(u - u^2/sigma^2) t / 2} (X(t)/x0)^(u/sigma^2), with log_rel = log(X/x0)."""
    s2 = params.sigma ** 2
    return np.exp(0.5 * (u - u * u / s2) * t + (u / s2) * log_rel)


def r_integrand(t, log_rel, u: float, params: ModelParams):
    """lambda exp(-lambda s) L(s; mu0) / L(s; u) evaluated along a path."""
    s2 = params.sigma ** 2
    mu0 = params.mu0
    rate = 0.5 * (mu0 - u - (mu0 * mu0 - u * u) / s2) - params.lam
    return params.lam * np.exp(rate * t + ((mu0 - u) / s2) * log_rel)


def trapezoid_r(t, log_rel, u: float, params: ModelParams):
    """Cumulative trapezoidal R(t_k; u) along the last axis of ``log_rel``."""
    f = r_integrand(t, log_rel, u, params)
    h = np.diff(t)
    inc = 0.5 * h * (f[..., :-1] + f[..., 1:])
    out = np.zeros_like(f)
    np.cumsum(inc, axis=-1, out=out[..., 1:])
    return out


def simulate_reference(params: ModelParams, grid: TimeGrid, m_paths: int, seed: int,
                       substeps: int = 1, threads: int = 1) -> PathBundle:
    """Simulate (X, L, R) and the posterior expectation of Z under the reference measure.

    With ``substeps > 1`` the state is simulated on a grid ``substeps`` times
    finer and R integrates over it; only the decision nodes are kept.
    """
    if m_paths < 1:
        raise ValueError("m_paths must be at least 1")
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    fine = grid.refined(substeps)
    h = fine.dt
    t_fine = fine.times
    n_fine = fine.n_steps
    sig = params.sigma
    levels = params.levels

    def block(b, start, stop):
        z = rng.stream(seed, b, rng.NORMALS).standard_normal((rng.BLOCK, n_fine))[: stop - start]
        log_rel = np.zeros((stop - start, n_fine + 1))
        np.cumsum(-0.5 * sig * sig * h + sig * np.sqrt(h) * z, axis=1, out=log_rel[:, 1:])
        lr = np.stack([likelihood_ratio(t_fine, log_rel, u, params) for u in levels], axis=1)
        rr = np.stack([trapezoid_r(t_fine, log_rel, u, params) for u in params.mus], axis=1)
        keep = slice(None, None, substeps)
        return log_rel[:, keep], lr[:, :, keep], rr[:, :, keep]

    parts = _map_blocks(block, m_paths, threads)
    log_rel = np.concatenate([p[0] for p in parts])
    l = np.concatenate([p[1] for p in parts])
    r = np.concatenate([p[2] for p in parts])
    return _assemble(params, grid, log_rel, l, r, seed, substeps)


def _assemble(params, grid, log_rel, l, r, seed, substeps=1) -> PathBundle:
    x = params.x0 * np.exp(log_rel)
    zpost = posterior_mean_z(grid.times, l, r, params)
    return PathBundle(grid=grid, x=_frozen(x), l=_frozen(l), r=_frozen(r),
                      zpost=_frozen(zpost), seed=int(seed), substeps=substeps)


def bundle_from_log_prices(params: ModelParams, grid: TimeGrid, log_rel, seed: int = -1) -> PathBundle:
    """Build a bundle from caller-supplied paths of log(X(t_k) / x0), shape (M, n+1)."""
    log_rel = np.asarray(log_rel, dtype=float)
    if log_rel.ndim != 2 or log_rel.shape[1] != grid.n_steps + 1:
        raise ValueError("log_rel must have shape (M, n_steps + 1)")
    t = grid.times
    l = np.stack([likelihood_ratio(t, log_rel, u, params) for u in params.levels], axis=1)
    r = np.stack([trapezoid_r(t, log_rel, u, params) for u in params.mus], axis=1)
    return _assemble(params, grid, log_rel, l, r, seed)


def posterior_mean_z(t, l, r, params: ModelParams):
    """E0[Z(t) | F(t)] = sum_j p_j L(t; mu_j) R(t; mu_j) + exp(-lambda t) L(t; mu0)."""
    out = np.exp(-params.lam * t) * l[:, 0]
    for j, p in enumerate(params.probs):
        out = out + p * l[:, j + 1] * r[:, j]
    return out


def simulate_physical(params: ModelParams, grid: TimeGrid, m_paths: int, seed: int,
                      threads: int = 1) -> PhysicalPaths:
    """Simulate the price under the physical measure with a latent change point.

    The piecewise-constant drift is integrated exactly inside each step. A
    change time sitting on a node belongs to the post-change regime.
    """
    if m_paths < 1:
        raise ValueError("m_paths must be at least 1")
    n = grid.n_steps
    t = grid.times
    dt = grid.dt
    sig = params.sigma
    mus = np.asarray(params.mus)

    def block(b, start, stop):
        size = stop - start
        z = rng.stream(seed, b, rng.NORMALS).standard_normal((rng.BLOCK, n))[:size]
        rho = rng.stream(seed, b, rng.CHANGE_TIME).exponential(1.0 / params.lam, rng.BLOCK)[:size]
        idx = rng.stream(seed, b, rng.LEVEL).choice(params.m, size=rng.BLOCK, p=params.probs)[:size]
        u = mus[idx]
        lo, hi = t[:-1][None, :], t[1:][None, :]
        rc = rho[:, None]
        before = np.clip(np.minimum(rc, hi) - lo, 0.0, None)
        after = np.clip(hi - np.maximum(rc, lo), 0.0, None)
        drift = params.mu0 * before + u[:, None] * after
        log_rel = np.zeros((size, n + 1))
        np.cumsum(drift - 0.5 * sig * sig * dt + sig * np.sqrt(dt) * z, axis=1, out=log_rel[:, 1:])
        return log_rel, rho, u

    parts = _map_blocks(block, m_paths, threads)
    x = params.x0 * np.exp(np.concatenate([p[0] for p in parts]))
    rho = np.concatenate([p[1] for p in parts])
    u = np.concatenate([p[2] for p in parts])
    return PhysicalPaths(grid=grid, x=_frozen(x), rho=_frozen(rho), u=_frozen(u), seed=int(seed))


def posterior_probabilities(bundle: PathBundle, params: ModelParams, path: int, k: int) -> np.ndarray:
    """Posterior masses of {rho >= t_k} and {rho < t_k, U = mu_j}, j = 1..m."""
    t = bundle.grid.times[k]
    l = bundle.l[path, :, k]
    r = bundle.r[path, :, k]
    terms = np.empty(params.m + 1)
    terms[0] = np.exp(-params.lam * t) * l[0]
    terms[1:] = np.asarray(params.probs) * l[1:] * r
    return terms / terms.sum()


def bundle_columns(m: int) -> list[str]:
    return (["path", "k", "t", "x"] + [f"l{j}" for j in range(m + 1)]
            + [f"r{j}" for j in range(1, m + 1)] + ["zpost"])


def write_bundle_csv(bundle: PathBundle, path) -> None:
    """One row per (path, k); floats written with round-trip precision."""
    m_paths, n1 = bundle.x.shape
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(bundle_columns(bundle.m))
        t = bundle.grid.times
        for p in range(m_paths):
            for k in range(n1):
                w.writerow([p, k, repr(float(t[k])), repr(float(bundle.x[p, k]))]
                           + [repr(float(v)) for v in bundle.l[p, :, k]]
                           + [repr(float(v)) for v in bundle.r[p, :, k]]
                           + [repr(float(bundle.zpost[p, k]))])


def read_bundle_csv(path, horizon: float, seed: int = -1) -> PathBundle:
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    m = sum(1 for c in header if c.startswith("r"))
    m_paths = int(data[:, 0].max()) + 1
    n1 = int(data[:, 1].max()) + 1
    if data.shape[0] != m_paths * n1:
        raise ValueError("path bundle CSV is not a full (path, k) table")
    data = data[np.lexsort((data[:, 1], data[:, 0]))].reshape(m_paths, n1, -1)
    x = np.ascontiguousarray(data[:, :, 3])
    l = np.ascontiguousarray(data[:, :, 4:5 + m].transpose(0, 2, 1))
    r = np.ascontiguousarray(data[:, :, 5 + m:5 + 2 * m].transpose(0, 2, 1))
    zpost = np.ascontiguousarray(data[:, :, 5 + 2 * m])
    return PathBundle(grid=TimeGrid(n1 - 1, horizon), x=_frozen(x), l=_frozen(l),
                      r=_frozen(r), zpost=_frozen(zpost), seed=seed)
