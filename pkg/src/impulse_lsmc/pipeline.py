"""simulate -> solve -> schedule -> backtest, with every artifact written to disk."""

from __future__ import annotations

import csv
import json
import logging
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__, rng
from .config import RunConfig, dump_config
from .sde import TimeGrid, read_bundle_csv, simulate_reference, write_bundle_csv
from .stopper import StopDistribution, backward_induction, stopping_distribution
from .strategy import (build_optimal_schedule, run_backtest, sample_arbitrary_schedules,
                       stability_curve)

log = logging.getLogger(__name__)


class NumericalError(RuntimeError):
    pass


def _finite(name, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(np.asarray(a, dtype=float))):
            raise NumericalError(f"non-finite values in {name}")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def sub_seeds(master: int) -> dict:
    return {"solver": rng.derive_seed(master, rng.SOLVER),
            "backtest": rng.derive_seed(master, rng.BACKTEST),
            "baselines": rng.derive_seed(master, rng.BASELINES)}


class Run:
    """One pipeline invocation: holds the config, output directory and stage timings."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.seeds = sub_seeds(cfg.seed)
        self.grid = TimeGrid(cfg.n_steps, cfg.params.horizon)
        self.timings = {}
        self.files = []
        self.extra = {}
        self.out.mkdir(parents=True, exist_ok=True)

    @contextmanager
    def timed(self, stage):
        t0 = time.perf_counter()
        yield
        self.timings[stage] = time.perf_counter() - t0
        log.info("%s done in %.2fs", stage, self.timings[stage])

    def _emit(self, name):
        self.files.append(name)
        return self.out / name

    def simulate(self):
        cfg = self.cfg
        with self.timed("simulate"):
            bundle = simulate_reference(cfg.params, self.grid, cfg.m_paths, self.seeds["solver"],
                                        substeps=cfg.substeps, threads=cfg.threads)
            _finite("path bundle", bundle.x, bundle.l, bundle.r, bundle.zpost)
        return bundle

    def dump_bundle(self, bundle):
        with self.timed("write_paths"):
            write_bundle_csv(bundle, self._emit("paths.csv"))

    def load_bundle(self, path):
        with self.timed("read_paths"):
            return read_bundle_csv(path, self.cfg.params.horizon, seed=self.seeds["solver"])

    def solve(self, bundle):
        cfg = self.cfg
        with self.timed("solve"):
            result = backward_induction(bundle, cfg.params, itm_filter=cfg.itm_filter,
                                        fitted_v1=cfg.fitted_v1, normalize=cfg.normalize)
            dist = stopping_distribution(result, bundle)
            _finite("stopping result", result.cont_values, dist.mass_p, dist.mass_p0)
        times = dist.times
        rows = [(k + 1, times[k + 1], dist.mass_p0[0, k], dist.mass_p0[1, k],
                 dist.mass_p[0, k], dist.mass_p[1, k]) for k in range(cfg.n_steps)]
        write_csv(self._emit("stopping_distribution.csv"),
                  ["k", "t", "buy_mass_p0", "sell_mass_p0", "buy_mass_p", "sell_mass_p"], rows)
        write_json(self._emit("value.json"), {
            "value": result.value, "q_scaled_value": cfg.q * result.value,
            "raw_value": result.raw_value, "std_error": result.std_error,
            "m_paths": bundle.m_paths, "n_steps": cfg.n_steps, "seed": self.seeds["solver"],
            "mass_p_row_sums": dist.mass_p.sum(axis=1).tolist(),
            "mass_p_std_errors": dist.mass_p_se.tolist(),
        })
        return result, dist

    def backtest(self, dist: StopDistribution):
        cfg = self.cfg
        with self.timed("backtest"):
            optimal = build_optimal_schedule(dist, cfg.q)
            arbitrary = sample_arbitrary_schedules(self.grid, cfg.q, cfg.m_arbitrary,
                                                   self.seeds["baselines"])
            report = run_backtest([optimal] + arbitrary, cfg.params, self.grid, cfg.m_new,
                                  self.seeds["backtest"], threads=cfg.threads)
            curve = stability_curve(optimal, cfg.params, self.grid, cfg.curve_paths,
                                    self.seeds["backtest"], threads=cfg.threads)
            _finite("backtest", report.terminal_money, curve)
        e, c = report.hist_edges, report.hist_counts
        write_csv(self._emit("backtest_means_hist.csv"), ["bin_left", "bin_right", "count"],
                  [(e[i], e[i + 1], c[i]) for i in range(len(c))])
        e, c = report.max_hist_edges, report.max_hist_counts
        write_csv(self._emit("backtest_max_hist.csv"), ["bin_left", "bin_right", "count"],
                  [(e[i], e[i + 1], c[i]) for i in range(len(c))])
        write_csv(self._emit("strategy_summary.csv"), ["strategy_id", "kind", "mean", "max"],
                  [(i, kind, report.mean_money[i], report.max_money[i])
                   for i, kind in enumerate(report.kinds)])
        write_csv(self._emit("stability_curve.csv"), ["m", "running_mean"],
                  [(int(m), v) for m, v in curve])
        self.extra["inventory_out_of_band"] = report.inventory_flags
        if 0 in report.inventory_flags:
            log.warning("optimal schedule inventory leaves [0, 1]")
        return report, curve

    def manifest(self):
        write_json(self.out / "run_manifest.json", {
            "version": __version__,
            "config": self.cfg.to_dict(),
            "config_text": dump_config(self.cfg),
            "sub_seeds": self.seeds,
            "rng": "numpy Philox keyed by SeedSequence(seed, spawn_key=(block, channel)); "
                   f"blocks of {rng.BLOCK} paths",
            "files": self.files,
            "timings_seconds": self.timings,
            **self.extra,
        })


def read_distribution_csv(path, horizon: float) -> StopDistribution:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = data.shape[0]
    times = horizon * np.arange(n + 1) / n
    return StopDistribution(times=times, mass_p0=data[:, 2:4].T.copy(),
                            mass_p=data[:, 4:6].T.copy(), mass_p_se=np.full(2, np.nan))


def run_pipeline(cfg: RunConfig) -> Run:
    """Full pipeline; returns the finished run (files listed in ``run.files``)."""
    run = Run(cfg)
    bundle = run.simulate()
    if cfg.dump_paths:
        run.dump_bundle(bundle)
    _, dist = run.solve(bundle)
    run.backtest(dist)
    run.manifest()
    return run
