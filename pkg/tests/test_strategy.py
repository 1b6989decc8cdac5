import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from impulse_lsmc.model import ModelParams
from impulse_lsmc.sde import TimeGrid, simulate_physical
from impulse_lsmc.stopper import StopDistribution
from impulse_lsmc.strategy import (HIST_BINS, Schedule, build_optimal_schedule, run_backtest,
                                   sample_arbitrary_schedule, sample_arbitrary_schedules,
                                   stability_curve, terminal_money)


def dist_from(buy, sell):
    n = len(buy)
    mass = np.array([buy, sell], dtype=float)
    return StopDistribution(times=np.linspace(0, 1, n + 1), mass_p0=mass, mass_p=mass,
                            mass_p_se=np.zeros(2))


class TestOptimalSchedule:
    def test_point_masses(self):
        s = build_optimal_schedule(dist_from([1, 0, 0, 0], [0, 0, 0, 1]), 100)
        np.testing.assert_array_equal(s.buy, [1, 0, 0, 0])
        np.testing.assert_array_equal(s.sell, [0, 0, 0, 1])
        assert s.kind == "optimal" and s.q == 100

    def test_normalised(self):
        s = build_optimal_schedule(dist_from([0.2, 0.5, 0.4], [0.1, 0.1, 0.9]), 1)
        assert abs(s.buy.sum() - 1) <= 1e-9 and abs(s.sell.sum() - 1) <= 1e-9

    def test_reference_run_identity(self, reference_solution):
        _, dist = reference_solution
        s = build_optimal_schedule(dist, 100)
        assert np.array_equal(s.buy, dist.normalized[0])
        assert np.array_equal(s.sell, dist.normalized[1])

    def test_rejects_zero_row(self):
        with pytest.raises(ValueError):
            build_optimal_schedule(dist_from([0, 0], [0.5, 0.5]), 1)


class TestArbitrarySchedule:
    def test_two_steps(self):
        g = TimeGrid(2, 1.0)
        s = sample_arbitrary_schedule(g, 1.0, seed=3)
        assert 0 <= s.buy[0] <= 1
        assert s.sell[1] == s.buy[0] - s.sell[0] + s.buy[1]
        assert s.inventory()[-1] == 0.0

    def test_rejects_single_step(self):
        with pytest.raises(ValueError):
            sample_arbitrary_schedule(TimeGrid(1, 1.0), 1.0, seed=0)

    def test_first_buy_uniform(self):
        g = TimeGrid(2, 1.0)
        first = np.array([sample_arbitrary_schedule(g, 1.0, 0, i).buy[0] for i in range(4000)])
        assert abs(first.mean() - 0.5) < 3 * math.sqrt(1 / 12 / 4000)
        assert first.min() >= 0 and first.max() <= 1

    def test_deterministic(self, grid):
        a = sample_arbitrary_schedules(grid, 100, 5, seed=9)
        b = sample_arbitrary_schedules(grid, 100, 5, seed=9)
        assert all(np.array_equal(x.buy, y.buy) and np.array_equal(x.sell, y.sell) for x, y in zip(a, b))


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2 ** 63), st.integers(0, 10_000), st.integers(2, 30))
def test_arbitrary_inventory_band(seed, index, n):
    s = sample_arbitrary_schedule(TimeGrid(n, 1.0), 1.0, seed, index)
    inv = s.inventory()
    assert np.all(inv >= 0) and np.all(inv <= 1)
    assert inv[-1] == 0.0
    assert np.all(s.buy >= 0) and np.all(s.sell >= 0)
    assert s.buy.sum() == pytest.approx(s.sell.sum(), abs=1e-12)


class TestBacktest:
    def test_constant_price(self, grid):
        prices = np.ones((7, 11))
        scheds = [build_optimal_schedule(dist_from([0.5, 0.5] + [0] * 8, [0] * 9 + [1]), 100)]
        money = terminal_money(scheds, prices)
        assert np.all(money == 0.0)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(-50 * 1024, 50 * 1024), st.integers(0, 1000))
    def test_shift_invariance_exact(self, shift, seed):
        # dyadic masses and prices keep every product and sum exact
        s = Schedule(np.array([0.25, 0.5, 0.25, 0.0]), np.array([0.0, 0.125, 0.375, 0.5]), 8.0, "optimal")
        prices = np.random.default_rng(seed).integers(512, 2048, size=(5, 5)) / 1024
        assert np.array_equal(terminal_money([s], prices), terminal_money([s], prices + shift / 1024))

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-50.0, 50.0), st.integers(0, 1000))
    def test_shift_invariance_rounding(self, shift, seed):
        gen = np.random.default_rng(seed)
        s = Schedule(gen.dirichlet(np.ones(4)), gen.dirichlet(np.ones(4)), 100.0, "optimal")
        prices = gen.uniform(0.5, 2.0, size=(5, 5))
        np.testing.assert_allclose(terminal_money([s], prices + shift), terminal_money([s], prices),
                                   rtol=0, atol=1e-9)

    def test_report(self, params, grid):
        scheds = sample_arbitrary_schedules(grid, 100, 40, seed=1)
        rep = run_backtest(scheds, params, grid, 500, seed=2)
        assert rep.terminal_money.shape == (40, 500)
        assert rep.hist_counts.sum() == 40 and len(rep.hist_edges) == HIST_BINS + 1
        assert np.all(rep.mean_money >= rep.terminal_money.min(axis=1))
        assert np.all(rep.mean_money <= rep.terminal_money.max(axis=1))
        assert rep.inventory_flags == []
        assert rep.kinds == ["arbitrary"] * 40

    def test_shared_paths(self, params, grid):
        a = sample_arbitrary_schedule(grid, 100, 1, 0)
        b = sample_arbitrary_schedule(grid, 100, 1, 1)
        together = run_backtest([a, b], params, grid, 300, seed=5).terminal_money
        alone = run_backtest([b], params, grid, 300, seed=5).terminal_money
        assert np.array_equal(together[1], alone[0])
        prices = simulate_physical(params, grid, 300, seed=5).x
        assert np.array_equal(together, terminal_money([a, b], prices))

    def test_rejects(self, params, grid):
        with pytest.raises(ValueError):
            run_backtest([], params, grid, 10, seed=0)
        with pytest.raises(ValueError):
            run_backtest([sample_arbitrary_schedule(grid, 1, 0)], params, grid, 0, seed=0)

    def test_flags_optimal_inventory(self, params, grid):
        s = build_optimal_schedule(dist_from([0] * 9 + [1], [1] + [0] * 9), 1)
        assert run_backtest([s], params, grid, 10, seed=0).inventory_flags == [0]


class TestStabilityCurve:
    def test_endpoint_equals_backtest_mean(self, params, grid):
        s = build_optimal_schedule(dist_from([1] + [0] * 9, [0] * 9 + [1]), 100)
        curve = stability_curve(s, params, grid, 700, seed=3)
        rep = run_backtest([s], params, grid, 700, seed=3)
        assert curve[-1, 1] == rep.mean_money[0]
        np.testing.assert_array_equal(curve[:, 0], np.arange(1, 701))

    def test_zero_drift(self, grid):
        p = ModelParams(mu0=0.0, mus=(0.0, 0.0), probs=(0.5, 0.5), lam=1.0, sigma=0.2)
        s = build_optimal_schedule(dist_from([1] + [0] * 9, [0] * 9 + [1]), 100)
        curve = stability_curve(s, p, grid, 4000, seed=8)
        money = terminal_money([s], simulate_physical(p, grid, 4000, seed=8).x)[0]
        assert abs(curve[-1, 1]) < 3 * money.std(ddof=1) / math.sqrt(4000)

    def test_rejects(self, params, grid):
        with pytest.raises(ValueError):
            stability_curve(sample_arbitrary_schedule(grid, 1, 0), params, grid, 0, seed=0)
