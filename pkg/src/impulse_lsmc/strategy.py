"""Static trading schedules and their backtest on fresh physical-measure paths."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .model import ModelParams
from .sde import TimeGrid, simulate_physical
from .stopper import StopDistribution

HIST_BINS = 30


@dataclass(frozen=True)
class Schedule:
    """Per-interval buy and sell fractions; entry k trades at X(t_{k+1})."""

    buy: np.ndarray
    sell: np.ndarray
    q: float
    kind: str = "arbitrary"

    def inventory(self) -> np.ndarray:
        """Position (in units of q) after each trading date."""
        out = np.empty(len(self.buy))
        pos = 0.0
        for k, (b, s) in enumerate(zip(self.buy, self.sell)):
            pos = (pos + b) - s
            out[k] = pos
        return out


def build_optimal_schedule(dist: StopDistribution, q: float) -> Schedule:
    totals = dist.mass_p.sum(axis=1)
    if np.any(totals <= 0):
        raise ValueError("stopping distribution has an all-zero row")
    norm = dist.normalized
    return Schedule(buy=norm[0].copy(), sell=norm[1].copy(), q=float(q), kind="optimal")


def sample_arbitrary_schedule(grid: TimeGrid, q: float, seed: int, index: int = 0) -> Schedule:
    """Random baseline built forward in time.

    At each date buy a uniform fraction of the unfilled capacity, then sell a
    uniform fraction of the position; the last date liquidates everything.
    """
    n = grid.n_steps
    if n < 2:
        raise ValueError("arbitrary schedules need at least two dates")
    gen = rng.stream(seed, index)
    buy = np.empty(n)
    sell = np.empty(n)
    pos = 0.0
    for k in range(n):
        buy[k] = gen.uniform(0.0, 1.0 - pos)
        held = pos + buy[k]
        sell[k] = held if k == n - 1 else gen.uniform(0.0, held)
        pos = held - sell[k]
    return Schedule(buy=buy, sell=sell, q=float(q))


def sample_arbitrary_schedules(grid: TimeGrid, q: float, count: int, seed: int) -> list[Schedule]:
    return [sample_arbitrary_schedule(grid, q, seed, i) for i in range(count)]


@dataclass(frozen=True)
class BacktestReport:
    kinds: list
    terminal_money: np.ndarray
    mean_money: np.ndarray
    max_money: np.ndarray
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    max_hist_edges: np.ndarray
    max_hist_counts: np.ndarray
    inventory_flags: list
    m_new: int


def terminal_money(schedules, prices: np.ndarray) -> np.ndarray:
    """M_n per (strategy, path), folding M_{k+1} = M_k + q (sell - buy) X(t_{k+1}) in time order."""
    buy = np.array([s.buy for s in schedules])
    sell = np.array([s.sell for s in schedules])
    q = np.array([s.q for s in schedules])[:, None]
    money = np.zeros((len(schedules), prices.shape[0]))
    for k in range(buy.shape[1]):
        money += q * (sell[:, k] - buy[:, k])[:, None] * prices[None, :, k + 1]
    return money


def running_mean(values: np.ndarray) -> np.ndarray:
    return np.cumsum(values, axis=-1) / np.arange(1, values.shape[-1] + 1)


def _histogram(values, bins=HIST_BINS):
    lo, hi = float(np.min(values)), float(np.max(values))
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return np.histogram(values, bins=bins, range=(lo, hi))


def run_backtest(schedules, params: ModelParams, grid: TimeGrid, m_new: int, seed: int,
                 threads: int = 1) -> BacktestReport:
    """Evaluate every schedule on one shared set of fresh physical paths."""
    if not schedules:
        raise ValueError("need at least one schedule")
    if m_new < 1:
        raise ValueError("m_new must be at least 1")
    paths = simulate_physical(params, grid, m_new, seed, threads=threads)
    money = terminal_money(schedules, paths.x)
    means = running_mean(money)[:, -1]
    maxes = money.max(axis=1)
    counts, edges = _histogram(means)
    mcounts, medges = _histogram(maxes)
    flags = []
    for i, s in enumerate(schedules):
        inv = s.inventory()
        if np.any(inv < -1e-9) or np.any(inv > 1 + 1e-9):
            flags.append(i)
    return BacktestReport(kinds=[s.kind for s in schedules], terminal_money=money,
                          mean_money=means, max_money=maxes, hist_edges=edges,
                          hist_counts=counts, max_hist_edges=medges, max_hist_counts=mcounts,
                          inventory_flags=flags, m_new=m_new)


def stability_curve(schedule: Schedule, params: ModelParams, grid: TimeGrid, max_paths: int,
                    seed: int, threads: int = 1) -> np.ndarray:
    """Rows (m, running mean of terminal money over the first m fresh paths)."""
    if max_paths < 1:
        raise ValueError("max_paths must be at least 1")
    paths = simulate_physical(params, grid, max_paths, seed, threads=threads)
    curve = running_mean(terminal_money([schedule], paths.x)[0])
    return np.column_stack([np.arange(1, max_paths + 1), curve])
