"""Seed-averaged trend sweeps over the desk-scale scenario.

Each sweep returns a ``Trend``: one row per sweep point, one column per seed.
The experiment scripts and the acceptance suite share these definitions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .sim import run_period

# one arrival in each of the first n mini slots
ARRIVAL_COUNTS = (0, 1, 2, 3, 4)
D_MAX_VALUES = (0.3e-3, 0.5e-3, 0.7e-3, 0.9e-3)
SCHEDULERS = ("adaptive", "equal", "fixed", "bcc", "oma")
# K sweep needs K >= 2M at every point, so it runs with two clusters
FAIRNESS_PROFILES = {4: (2, 2), 6: (3, 3), 9: (5, 4)}


def staggered(n: int) -> dict:
    return {s: 1 for s in range(1, n + 1)}


@dataclass
class Trend:
    name: str
    points: list
    values: np.ndarray                 # points x seeds
    metric: str = "mean_total"
    extra: dict = field(default_factory=dict)

    @property
    def means(self) -> np.ndarray:
        return np.nanmean(self.values, axis=1)

    def non_increasing(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.means) <= tol))

    def non_decreasing(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.diff(self.means) >= -tol))

    def table(self) -> str:
        rows = [f"{self.name} ({self.metric}, {self.values.shape[1]} seeds)"]
        for p, v, row in zip(self.points, self.means, self.values):
            rows.append(f"  {str(p):>12}  mean {v:9.4f}  sd {np.nanstd(row):7.4f}")
        return "\n".join(rows)


def _sweep(name, configs, seeds, metric="mean_total", progress=None) -> Trend:
    vals = np.full((len(configs), len(seeds)), np.nan)
    drops = np.zeros_like(vals)
    for j, seed in enumerate(seeds):
        for i, (_, cfg) in enumerate(configs):
            _, summary = run_period(cfg.replace(seed=seed))
            vals[i, j] = getattr(summary, metric)
            drops[i, j] = summary.urllc_dropped
        if progress:
            progress(name, j + 1, len(seeds))
    return Trend(name, [p for p, _ in configs], vals, metric, {"dropped": drops})


def arrivals_trend(seeds, base: ScenarioConfig | None = None, counts=ARRIVAL_COUNTS, **kw) -> Trend:
    base = base or ScenarioConfig()
    cfgs = [(n, base.replace(arrival_schedule=staggered(n))) for n in counts]
    return _sweep("arrivals", cfgs, seeds, **kw)


def dmax_trend(seeds, base: ScenarioConfig | None = None, d_values=D_MAX_VALUES,
               bandwidth_hz: float = 10e6, arrivals=None, **kw) -> Trend:
    base = (base or ScenarioConfig()).replace(
        bandwidth_hz=bandwidth_hz, arrival_schedule=arrivals or {1: 1, 2: 1})
    cfgs = [(d, base.replace(d_max=d)) for d in d_values]
    return _sweep("d_max", cfgs, seeds, **kw)


def scheduler_trend(seeds, base: ScenarioConfig | None = None, schedulers=SCHEDULERS,
                    metric="mean_total", **kw) -> Trend:
    base = (base or ScenarioConfig()).replace(arrival_schedule=staggered(4))
    cfgs = [(s, base.replace(scheduler=s)) for s in schedulers]
    return _sweep("scheduler", cfgs, seeds, metric=metric, **kw)


def fairness_trend(seeds, scheduler="adaptive", base: ScenarioConfig | None = None,
                   profiles=None, **kw) -> Trend:
    profiles = profiles or FAIRNESS_PROFILES
    base = (base or ScenarioConfig()).replace(arrival_schedule=staggered(4), scheduler=scheduler)
    cfgs = [(K, base.replace(K=K, M=len(p), size_profile=p)) for K, p in profiles.items()]
    return _sweep(f"jain[{scheduler}]", cfgs, seeds, metric="jain", **kw)


__all__ = ["Trend", "staggered", "arrivals_trend", "dmax_trend", "scheduler_trend",
           "fairness_trend", "ARRIVAL_COUNTS", "D_MAX_VALUES", "SCHEDULERS", "FAIRNESS_PROFILES"]
