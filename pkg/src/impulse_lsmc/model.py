"""Problem definition: priors, drift regimes, rewards and the transformed rewards.

Under the reference measure the drift of the observed diffusion disappears
and the rewards pick up a weight

    W(t, l, r) = sum_j p_j l_j r_j + exp(-lambda t) l_0

built from the likelihood ratios ``l`` and the weighted integrals ``r``.
``alpha`` is the running part, ``beta`` the part paid at an intervention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

Scalar = Callable[[float], float]


@dataclass(frozen=True)
class ModelParams:
    """Change-point model for a geometric Brownian motion.

    The drift starts at ``mu0`` and at an Exp(``lam``) time jumps to
    ``mus[j]`` with probability ``probs[j]``.
    """

    mu0: float
    mus: tuple[float, ...]
    probs: tuple[float, ...]
    lam: float
    sigma: float
    x0: float = 1.0
    horizon: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mus", tuple(float(u) for u in self.mus))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.mus) < 1:
            raise ValueError("mus must hold at least one post-change drift level")
        if len(self.probs) != len(self.mus):
            raise ValueError("probs and mus must have the same length")
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError("probs must be nonnegative and sum to 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.x0 > 0:
            raise ValueError("x0 must be positive")

    @property
    def m(self) -> int:
        return len(self.mus)

    @property
    def levels(self) -> tuple[float, ...]:
        """All drift levels, pre-change level first."""
        return (self.mu0,) + self.mus


def reference_params() -> ModelParams:
    """Reference configuration: one rising regime, one falling regime."""
    return ModelParams(mu0=0.1, mus=(0.1, -0.1), probs=(0.5, 0.5), lam=1.0,
                       sigma=0.2, x0=1.0, horizon=1.0)


@dataclass(frozen=True)
class RewardSpec:
    """Reward functions of the impulse control problem.

    ``xi_d1``/``xi_d2`` are the closed-form derivatives of ``xi``; they are
    never differentiated numerically.
    """

    h: Scalar
    xi: Scalar
    xi_d1: Scalar
    xi_d2: Scalar
    c: Callable[[float, float], float]
    gamma: Callable[[float, float], float]


def _zero(*_):
    return 0.0


def gbm_rewards() -> RewardSpec:
    """Buy/sell one share: no running or terminal reward, no price impact, c(x, z) = z x."""
    return RewardSpec(h=_zero, xi=_zero, xi_d1=_zero, xi_d2=_zero,
                      c=lambda x, z: z * x, gamma=_zero)


PRESETS = {"gbm": gbm_rewards}


@dataclass(frozen=True)
class AugmentedState:
    """Point (t, x, l_0..l_m, r_1..r_m) of the sufficient statistic."""

    t: float
    x: float
    l: tuple[float, ...]
    r: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "l", tuple(float(v) for v in self.l))
        object.__setattr__(self, "r", tuple(float(v) for v in self.r))
        if len(self.l) != len(self.r) + 1:
            raise ValueError("l must have exactly one more entry than r")
        if any(v <= 0 for v in self.l):
            raise ValueError("likelihood ratios must be positive")
        if any(v < 0 for v in self.r):
            raise ValueError("r components must be nonnegative")

    def shifted(self, dx: float) -> "AugmentedState":
        return AugmentedState(self.t, self.x + dx, self.l, self.r)


def gbm_drift(t, x, u):
    return u * x


def gbm_diffusion(t, x, sigma):
    return sigma * x


def posterior_weight(state: AugmentedState, params: ModelParams) -> float:
    """W = sum_j p_j l_j r_j + exp(-lambda t) l_0."""
    _check_dims(state, params)
    s = sum(p * lj * rj for p, lj, rj in zip(params.probs, state.l[1:], state.r))
    return s + math.exp(-params.lam * state.t) * state.l[0]


def alpha(state: AugmentedState, params: ModelParams, rewards: RewardSpec,
          drift=gbm_drift, diffusion=gbm_diffusion) -> float:
    t, x = state.t, state.x
    w = posterior_weight(state, params)
    vol = diffusion(t, x, params.sigma)
    drift_w = sum(p * lj * rj * drift(t, x, u)
                  for p, lj, rj, u in zip(params.probs, state.l[1:], state.r, params.mus))
    drift_w += math.exp(-params.lam * t) * state.l[0] * drift(t, x, params.mu0)
    return w * (rewards.h(x) + 0.5 * rewards.xi_d2(x) * vol * vol) + drift_w * rewards.xi_d1(x)


def beta(state: AugmentedState, z: float, params: ModelParams, rewards: RewardSpec) -> float:
    x = state.x
    jump = rewards.gamma(x, z)
    bracket = rewards.xi(x + jump) - rewards.xi(x) + rewards.xi_d1(x) * jump + rewards.c(x, z)
    return posterior_weight(state, params) * bracket


def beta_bar(t, x, r, z, params: ModelParams):
    """Intervention reward of the GBM preset written in terms of (t, x, r).

    Vectorised over numpy arrays: ``x`` and ``t`` broadcast together and ``r``
    carries the regimes on its leading axis.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("beta_bar needs x > 0")
    r = np.asarray(r, dtype=float)
    if r.shape[0] != params.m:
        raise ValueError(f"r must have {params.m} components on its leading axis")
    return z * _beta_bar_weight(t, x, r, params)


def _beta_bar_weight(t, x, r, params: ModelParams):
    s2 = params.sigma ** 2
    logx = np.log(x / params.x0)
    mu0 = params.mu0
    out = np.exp(0.5 * (mu0 - mu0 * mu0 / s2) * t - params.lam * t + (mu0 / s2) * logx)
    for j, (u, p) in enumerate(zip(params.mus, params.probs)):
        out = out + p * np.exp(0.5 * (u - u * u / s2) * t + (u / s2) * logx) * r[j]
    return x * out


def intervention_operator(value_next, state: AugmentedState, z_grid: Sequence[float],
                          params: ModelParams, rewards: RewardSpec) -> float:
    """max over z of value_next(t, Gamma(state, z)) + beta(state, z).

    Gamma moves x by gamma(x, z) and leaves (l, r) alone. Ties keep the
    earliest z in the grid.
    """
    if len(z_grid) == 0:
        raise ValueError("z_grid must not be empty")
    best = -math.inf
    for z in z_grid:
        post = state.shifted(rewards.gamma(state.x, z))
        cand = value_next(state.t, post) + beta(state, z, params, rewards)
        if cand > best:
            best = cand
    return best


def _check_dims(state: AugmentedState, params: ModelParams):
    if len(state.r) != params.m:
        raise ValueError(f"state has {len(state.r)} regimes, params has {params.m}")


__all__ = [
    "ModelParams", "RewardSpec", "AugmentedState", "PRESETS", "reference_params",
    "gbm_rewards", "posterior_weight", "alpha", "beta", "beta_bar",
    "intervention_operator",
]
