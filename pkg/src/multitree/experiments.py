"""Repeated-run experiments: percentile curves over seeded batches, the
named degree-profile scenarios, and the single-tree convergence-time trials.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .protocol import RULE_BITS, DepthMode, Rule
from .sim import ConfigError, DegreeProfile, SimConfig, Simulation

DEFAULT_PERCENTILES = (0.2, 1.0, 5.0, 50.0, 100.0)

# metric name -> True when larger values are better
METRICS = {
    "fraction_fully_covered": True,
    "max_tree_depth": False,
    "cycle_count": False,
    "buffered_depth_error": False,
}


@dataclass(frozen=True)
class BatchSpec:
    base: SimConfig
    repeats: int = 500
    percentiles: tuple[float, ...] = DEFAULT_PERCENTILES
    metrics: tuple[str, ...] = ("fraction_fully_covered", "max_tree_depth")

    def validate(self) -> BatchSpec:
        self.base.validate()
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        for p in self.percentiles:
            if not 0 < p <= 100:
                raise ConfigError(f"percentile {p} outside (0, 100]")
        for name in self.metrics:
            if name not in METRICS:
                raise ConfigError(f"unknown metric {name!r}")
        return self


@dataclass(frozen=True)
class PercentileCurve:
    metric: str
    percentile: float
    times: np.ndarray
    values: np.ndarray

    @property
    def points(self):
        return list(zip(self.times.tolist(), self.values.tolist()))


@dataclass
class BatchResult:
    spec: BatchSpec
    times: np.ndarray
    series: dict[str, np.ndarray]  # metric -> (repeats, len(times))
    curves: dict[str, list[PercentileCurve]]
    event_counts: np.ndarray  # (repeats,)
    wall_time: float = 0.0

    def curve(self, metric, percentile) -> PercentileCurve:
        for c in self.curves[metric]:
            if math.isclose(c.percentile, percentile):
                return c
        raise KeyError((metric, percentile))

    def summary(self) -> dict:
        cov = self.series.get("fraction_fully_covered")
        out = {
            "config": self.spec.base.to_dict(),
            "repeats": self.spec.repeats,
            "percentiles": list(self.spec.percentiles),
            "seed": self.spec.base.seed,
            "run_indices": list(range(self.spec.repeats)),
            "wall_time_s": round(self.wall_time, 3),
            "mean_events": float(self.event_counts.mean()),
        }
        if cov is not None:
            out["fraction_runs_fully_covered_at_end"] = float((cov[:, -1] >= 1.0).mean())
        return out


def order_statistic_index(percentile: float, repeats: int) -> int:
    """Index into runs sorted worst-first for the ``percentile``% curve."""
    return max(0, math.ceil(percentile / 100.0 * repeats - 1e-9) - 1)


def percentile_values(matrix: np.ndarray, percentile: float, higher_is_better: bool) -> np.ndarray:
    """Pointwise value y such that ``percentile``% of runs are at or worse than y."""
    worst_first = np.sort(matrix, axis=0)
    if not higher_is_better:
        worst_first = worst_first[::-1]
    return worst_first[order_statistic_index(percentile, matrix.shape[0])].copy()


def _run_one(args):
    config, run_index, metrics = args
    sim = Simulation(config, run_index)
    samples = sim.run()
    return {name: np.array([getattr(s, name) for s in samples]) for name in metrics}, sim.events


def run_batch(spec: BatchSpec, jobs: int = 1) -> BatchResult:
    spec.validate()
    t0 = time.perf_counter()
    tasks = [(spec.base, r, spec.metrics) for r in range(spec.repeats)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_run_one(t) for t in tasks]
    times = Simulation(spec.base).record_times()
    series = {name: np.vstack([r[0][name] for r in results]) for name in spec.metrics}
    curves = {
        name: [PercentileCurve(name, p, times, percentile_values(series[name], p, METRICS[name]))
               for p in spec.percentiles]
        for name in spec.metrics
    }
    events = np.array([r[1] for r in results])
    return BatchResult(spec, times, series, curves, events, time.perf_counter() - t0)


SCENARIOS = ("tight", "source_coding", "loose", "server_client", "polarized")


def scenario(name: str, k: int = 2, m: int | None = None, alpha: float = 0.0, r: float = 2.0,
             n: int = 1000, repeats: int = 500, seed: int = 0, horizon: float = 100.0,
             depth_mode: DepthMode = DepthMode.DISTRIBUTED) -> BatchSpec:
    """Batch setup for one of the named degree-profile experiments."""
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    if name == "source_coding":
        m = 4 if m is None else m
        k = 3
        if m not in (3, 4, 9):
            raise ConfigError(f"source_coding uses M in {{3, 4, 9}}, got {m}")
    m = k if m is None else m
    profile = {
        "tight": DegreeProfile.tight,
        "source_coding": DegreeProfile.tight,
        "loose": lambda: DegreeProfile.loose(alpha),
        "server_client": lambda: DegreeProfile.server_client(r, alpha),
        "polarized": lambda: DegreeProfile.polarized(r, alpha),
    }[name]()
    base = SimConfig(n=n, m=m, k=k, profile=profile, depth_mode=depth_mode, horizon=horizon,
                     record_interval=1.0, seed=seed)
    return BatchSpec(base=base, repeats=repeats).validate()


# ------------------------------------------------------- single-tree trials

SIMPLIFIED_RULES = RULE_BITS[Rule.ADD] | RULE_BITS[Rule.JUMP]


def bound_threshold(n: int, eps: float) -> float:
    return 21 * math.log2(n + 1) + 16 * eps


@dataclass
class BoundTrialResult:
    n: int
    trials: int
    t_samples: np.ndarray
    epsilon_grid: tuple[float, ...]
    empirical_tail: dict[float, float] = field(default_factory=dict)

    @property
    def median(self) -> float:
        return float(np.median(self.t_samples))


def bound_config(n: int, seed: int = 0) -> SimConfig:
    return SimConfig(n=n, m=1, k=1, profile=DegreeProfile.explicit([2] * n),
                     depth_mode=DepthMode.INSTANTANEOUS, horizon=0.0, seed=seed)


def convergence_time(n: int, seed: int, trial: int, max_time: float | None = None) -> float:
    """First time every node sits within ceil(log2(N+1)) hops of the root
    under the add-and-jump-only dynamics; ``inf`` if not reached by
    ``max_time``."""
    thr = math.ceil(math.log2(n + 1))
    if max_time is None:
        max_time = 10 * bound_threshold(n, 10)
    sim = Simulation(bound_config(n, seed), trial, rules=SIMPLIFIED_RULES)
    return sim.run_until_shallow(thr, max_time)


def bound_experiment(n: int, trials: int, seed: int = 0,
                     epsilons=(1.0, 2.0, 3.0)) -> BoundTrialResult:
    if n < 2 or trials < 1:
        raise ConfigError(f"need n >= 2 and trials >= 1, got n={n} trials={trials}")
    ts = np.array([convergence_time(n, seed, t) for t in range(trials)])
    eps = tuple(float(e) for e in epsilons)
    tail = {e: float((ts > bound_threshold(n, e)).mean()) for e in eps}
    return BoundTrialResult(n, trials, ts, eps, tail)


def with_repeats(spec: BatchSpec, repeats: int) -> BatchSpec:
    return replace(spec, repeats=repeats)
