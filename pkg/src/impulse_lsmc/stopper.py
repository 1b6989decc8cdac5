"""Longstaff-Schwartz backward induction for a buy time and a later sell time.

Both passes propagate stopping times (not value surfaces): the continuation
value at t_k is the regression of the realised payoff of the current policy
on g(Y(t_k)) = (1, X(t_k), R(t_k; mu_1), ..., R(t_k; mu_m)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, beta_bar
from .sde import PathBundle

SVD_RTOL = 1e-10


@dataclass(frozen=True)
class RegressionFit:
    coefficients: np.ndarray
    singular_values: np.ndarray
    rank: int

    @property
    def basis_dim(self) -> int:
        return self.coefficients.shape[0]

    def predict(self, design: np.ndarray) -> np.ndarray:
        return design @ self.coefficients


def design_matrix(bundle: PathBundle, k: int) -> np.ndarray:
    """Monomial basis (1, X, R_1, ..., R_m) at node k, one row per path."""
    cols = [np.ones(bundle.m_paths), bundle.x[:, k]]
    cols.extend(bundle.r[:, j, k] for j in range(bundle.m))
    return np.column_stack(cols)


def fit_regression(targets, bundle: PathBundle, k: int, mask=None) -> RegressionFit:
    """Least squares of ``targets`` on the basis at t_k through the SVD of the moment matrix.

    Singular values below ``SVD_RTOL`` times the largest are dropped. ``mask``
    restricts the fit to a subset of paths.
    """
    targets = np.asarray(targets, dtype=float)
    if targets.shape != (bundle.m_paths,):
        raise ValueError("targets needs one entry per path")
    if not 0 <= k < bundle.grid.n_steps:
        raise ValueError("k must lie in [0, n)")
    return _solve(design_matrix(bundle, k), targets, mask)


def _solve(g: np.ndarray, y: np.ndarray, mask=None) -> RegressionFit:
    if mask is not None:
        g, y = g[mask], y[mask]
    dim = g.shape[1]
    if g.shape[0] == 0:
        return RegressionFit(np.zeros(dim), np.zeros(dim), 0)
    # einsum keeps the path reduction in a fixed order (no threaded BLAS)
    psi = np.einsum("pi,pj->ij", g, g) / g.shape[0]
    rhs = np.einsum("pi,p->i", g, y) / g.shape[0]
    u, s, vt = np.linalg.svd(psi)
    keep = s > SVD_RTOL * s[0]
    coef = vt[keep].T @ ((u[:, keep].T @ rhs) / s[keep])
    rank = int(keep.sum())
    if not np.all(np.isfinite(coef)):
        coef = np.zeros(dim)
        coef[0] = np.mean(y)
        rank = 1
    return RegressionFit(coef, s, rank)


@dataclass(frozen=True)
class StoppingResult:
    """Per-path buy index ``tau1`` and sell index ``tau2`` (grid indices in 1..n)."""

    tau1: np.ndarray
    tau2: np.ndarray
    value: float
    raw_value: float
    std_error: float
    cont_values: np.ndarray


def backward_induction(bundle: PathBundle, params: ModelParams, itm_filter: bool = False,
                       fitted_v1: bool = True, normalize: bool = True,
                       direction: int = 1) -> StoppingResult:
    """Compute tau1 <= tau2 per path and the value estimate max(E0[payoff], 0).

    The first pass finds the closing time (sell), the second the opening time
    (buy), whose stop reward is the opening reward plus the closing
    continuation V1(k).

    ``fitted_v1``: V1(k) in the opening rule is max(closing reward, fitted
    continuation), which is known at t_k. With ``False`` the realised
    pass-one payoff is used instead; that payoff depends on prices after t_k,
    so the opening time peeks into the future and the value is biased up.

    ``normalize``: regress payoff / zpost(t_k) and multiply the fit back by
    zpost(t_k). Conditional expectations are unchanged, but the regressand
    becomes a physical-measure price, which the (1, X, R) basis fits well.

    ``itm_filter`` restricts each regression and stop decision to paths whose
    stop reward is positive. ``direction=-1`` opens with a sell and closes
    with a buy.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    n = bundle.grid.n_steps
    if n < 2:
        raise ValueError("backward induction needs at least two time steps")
    m_paths = bundle.m_paths
    t = bundle.grid.times
    close = beta_bar(t[None, :], bundle.x, np.moveaxis(bundle.r, 1, 0), float(direction), params)
    rows = np.arange(m_paths)

    def continuation(payoff, k, itm):
        scale = bundle.zpost[:, k] if normalize else 1.0
        fit = fit_regression(payoff / scale, bundle, k, itm)
        return fit.predict(design_matrix(bundle, k)) * scale

    tau2 = np.full(m_paths, n)
    payoff2 = close[:, n].copy()
    tau2_from = np.empty((m_paths, n + 1), dtype=int)
    v1 = np.empty((m_paths, n + 1))
    v1_fit = np.empty((m_paths, n + 1))
    tau2_from[:, n] = n
    v1[:, n] = v1_fit[:, n] = payoff2
    for k in range(n - 1, 0, -1):
        stop = close[:, k]
        itm = stop > 0 if itm_filter else None
        cont = continuation(payoff2, k, itm)
        hit = stop > cont
        if itm is not None:
            hit &= itm
        tau2[hit] = k
        payoff2[hit] = stop[hit]
        tau2_from[:, k] = tau2
        v1[:, k] = payoff2
        v1_fit[:, k] = np.maximum(stop, cont)

    v1_rule = v1_fit if fitted_v1 else v1
    tau1 = np.full(m_paths, n)
    payoff1 = -close[:, n] + v1[:, n]
    for k in range(n - 1, 0, -1):
        stop = -close[:, k] + v1_rule[:, k]
        itm = stop > 0 if itm_filter else None
        cont = continuation(payoff1, k, itm)
        hit = stop > cont
        if itm is not None:
            hit &= itm
        tau1 = np.where(hit, k, np.minimum(tau2_from[:, k], tau1))
        payoff1 = -close[rows, tau1] + v1[rows, tau1]

    tau2 = tau2_from[:, 1].copy()
    raw = float(np.mean(payoff1))
    se = float(np.std(payoff1) / np.sqrt(m_paths))
    return StoppingResult(tau1=tau1, tau2=tau2, value=max(raw, 0.0), raw_value=raw,
                          std_error=se, cont_values=payoff1)


@dataclass(frozen=True)
class StopDistribution:
    """Per-interval stopping masses; row 0 is the buy time, row 1 the sell time.

    Column k is the interval (t_k, t_{k+1}]. ``mass_p`` weights each path by
    the posterior expectation of Z, which turns reference-measure masses into
    physical-measure ones.
    """

    times: np.ndarray
    mass_p0: np.ndarray
    mass_p: np.ndarray
    mass_p_se: np.ndarray

    @property
    def normalized(self) -> np.ndarray:
        return self.mass_p / self.mass_p.sum(axis=1, keepdims=True)


def stopping_distribution(result: StoppingResult, bundle: PathBundle) -> StopDistribution:
    n = bundle.grid.n_steps
    m_paths = bundle.m_paths
    rows = np.arange(m_paths)
    p0 = np.zeros((2, n))
    p = np.zeros((2, n))
    se = np.zeros(2)
    for i, tau in enumerate((result.tau1, result.tau2)):
        p0[i] = np.bincount(tau - 1, minlength=n)[:n] / m_paths
        w = bundle.zpost[rows, tau]
        p[i] = np.bincount(tau - 1, weights=w, minlength=n)[:n] / m_paths
        se[i] = np.std(w) / np.sqrt(m_paths)
    return StopDistribution(times=bundle.grid.times.copy(), mass_p0=p0, mass_p=p, mass_p_se=se)
