"""Demand-satisfaction metrics and empirical distributions.

Two normalized headline metrics compare strategies across scenarios:

* normalized quadratic unmet capacity (nqu): the sum of squared per-user
  rate gaps divided by a reference scalar derived from the rigid uniform
  system evaluated on the same realization;
* normalized unmet capacity (nu): the unserved fraction of aggregate demand.

The uniform reference system keeps the initial beam grid, splits the band
evenly, uses the calibrated carrier power, maps every user to its dominant
beam, and schedules carriers the same way the strategies do. Both its total
offered rate and its quadratic offered rate are recorded per realization so
either normalization can be recomputed offline.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class UniformBaseline:
    """Offered rates of the rigid uniform system on one realization."""

    per_user_rates: np.ndarray

    @property
    def total_offered(self) -> float:
        """Scalar total offered rate, Mbps."""
        return float(self.per_user_rates.sum())

    @property
    def quadratic_offered(self) -> float:
        """Sum of squared per-user offered rates, Mbps^2.

        This is the reference used to normalize quadratic unmet demand: it has
        the numerator's units and, at the calibrated design point, reduces to
        user_count * per_user_demand^2.
        """
        return float((self.per_user_rates ** 2).sum())


@dataclass(frozen=True)
class RunMetrics:
    """Per-realization outcome summary for one strategy."""

    nqu: float
    nu: float
    total_offered_mbps: float
    min_user_rate_mbps: float
    per_user_rates: np.ndarray
    iterations: int
    wall_time_s: float

    def __post_init__(self):
        if self.nqu < 0 or self.total_offered_mbps < -1e-9:
            raise ValueError("negative metric")


def nqu(required, offered, baseline_quadratic_offered: float) -> float:
    """Normalized quadratic unmet capacity.

    sum_n (required_n - offered_n)^2 divided by the uniform reference scalar.
    """
    if baseline_quadratic_offered <= 0:
        raise ValueError("baseline reference must be positive")
    required = np.asarray(required, dtype=float)
    offered = np.asarray(offered, dtype=float)
    return float(((required - offered) ** 2).sum() / baseline_quadratic_offered)


def nu(offered, total_demand: float) -> float:
    """Normalized unmet capacity (T - sum offered) / T.

    Reported unclamped; it would only go negative if offered ever exceeded
    demand, which the schedulers prevent.
    """
    if total_demand <= 0:
        raise ValueError("total demand must be positive")
    return float((total_demand - np.asarray(offered, dtype=float).sum()) / total_demand)


def run_metrics(required, offered, baseline: UniformBaseline,
                iterations: int, wall_time_s: float) -> RunMetrics:
    """Bundle the per-run metrics for one strategy outcome."""
    required = np.asarray(required, dtype=float)
    offered = np.asarray(offered, dtype=float)
    return RunMetrics(
        nqu=nqu(required, offered, baseline.quadratic_offered),
        nu=nu(offered, float(required.sum())),
        total_offered_mbps=float(offered.sum()),
        min_user_rate_mbps=float(offered.min()) if len(offered) else 0.0,
        per_user_rates=offered,
        iterations=iterations,
        wall_time_s=wall_time_s,
    )


def empirical_cdf(samples) -> list[tuple[float, float]]:
    """Step-function CDF as sorted (value, cumulative probability) pairs.

    Duplicate values collapse into one step; the last probability is exactly
    1.0.
    """
    arr = np.sort(np.asarray(samples, dtype=float))
    if arr.size == 0:
        raise ValueError("empty sample set")
    values, counts = np.unique(arr, return_counts=True)
    probs = np.cumsum(counts) / arr.size
    probs[-1] = 1.0
    return list(zip(values.tolist(), probs.tolist()))
