"""Change-point impulse control by regression Monte Carlo.

A GBM whose drift switches at an unobserved exponential time is traded with
one buy and one sell. The problem is moved to a measure where the drift
vanishes, solved there with a two-pass Longstaff-Schwartz induction, and the
resulting stopping-time distribution is turned into a static schedule that is
backtested against random baselines.
"""

__version__ = "0.1.0"

from .model import (AugmentedState, ModelParams, RewardSpec, alpha, beta, beta_bar,
                    gbm_rewards, intervention_operator, reference_params)
from .sde import (PathBundle, PhysicalPaths, TimeGrid, posterior_probabilities,
                  simulate_physical, simulate_reference)
from .stopper import (RegressionFit, StopDistribution, StoppingResult, backward_induction,
                      fit_regression, stopping_distribution)
from .strategy import (BacktestReport, Schedule, build_optimal_schedule, run_backtest,
                       sample_arbitrary_schedule, stability_curve)

__all__ = [
    "AugmentedState", "ModelParams", "RewardSpec", "alpha", "beta", "beta_bar",
    "gbm_rewards", "intervention_operator", "reference_params",
    "PathBundle", "PhysicalPaths", "TimeGrid", "posterior_probabilities",
    "simulate_physical", "simulate_reference",
    "RegressionFit", "StopDistribution", "StoppingResult", "backward_induction",
    "fit_regression", "stopping_distribution",
    "BacktestReport", "Schedule", "build_optimal_schedule", "run_backtest",
    "sample_arbitrary_schedule", "stability_curve",
]
