"""Poisson-clock driver: scenario configuration, initial overlay, event loop
and fixed-interval metric recording.

All N per-node rate-mu clocks are simulated as one rate ``N*mu`` clock with a
uniformly chosen sampler, which has the same law. Random draws come from a
PCG64 stream keyed by ``(seed, run_index)`` and are drawn in blocks before
being handed to the kernels, so the numba and pure-numpy backends see the
same event sequence.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import kernels as K
from .graph import GraphState, build_link
from .protocol import ALL_RULES, DepthMode, RuleOutcome

BLOCK = 8192


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DegreeProfile:
    """How outgoing degree caps are assigned.

    kinds: ``tight``, ``loose``, ``server_client``, ``polarized``, ``explicit``.
    """

    kind: str = "tight"
    alpha: float = 0.0
    r: float = 1.0
    caps: tuple[int, ...] | None = None

    KINDS = ("tight", "loose", "server_client", "polarized", "explicit")

    @classmethod
    def tight(cls):
        return cls("tight")

    @classmethod
    def loose(cls, alpha):
        return cls("loose", alpha=alpha)

    @classmethod
    def server_client(cls, r, alpha=0.0):
        return cls("server_client", alpha=alpha, r=r)

    @classmethod
    def polarized(cls, r, alpha=0.0):
        return cls("polarized", alpha=alpha, r=r)

    @classmethod
    def explicit(cls, caps):
        return cls("explicit", caps=tuple(int(c) for c in caps))

    def validate(self, n, m, k):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown degree profile {self.kind!r}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.kind in ("server_client", "polarized"):
            if self.r < 1:
                raise ConfigError(f"r must be >= 1, got {self.r}")
            if self._n_servers(n) < m:
                raise ConfigError(f"{self._n_servers(n)} server nodes cannot include all {m} roots")
            if self._n_servers(n) > n:
                raise ConfigError(f"profile asks for {self._n_servers(n)} server nodes out of {n}")
        if self.kind == "explicit":
            if self.caps is None or len(self.caps) != n:
                raise ConfigError(f"explicit profile needs {n} caps")
            if min(self.caps) < 0:
                raise ConfigError("degree caps must be non-negative")

    def _n_servers(self, n):
        if self.kind == "server_client":
            return int(round(n / self.r))
        return int(round((1 + self.alpha) * n / self.r))

    def assign(self, n, m, k, rng) -> np.ndarray:
        """Degree caps (index 0 is node 1)."""
        if self.kind == "explicit":
            return np.array(self.caps, dtype=np.int64)
        if self.kind == "tight":
            caps = np.full(n, k, dtype=np.int64)
            caps[:m] = k - 1
            return caps
        if self.kind == "loose":
            caps = np.full(n, k, dtype=np.int64)
            extra = int(math.floor(self.alpha * n * k + 1e-9))
            np.add.at(caps, rng.integers(0, n, extra), 1)
            return caps
        # server-client variants: roots are always servers
        n_srv = self._n_servers(n)
        others = rng.permutation(np.arange(m, n))[: n_srv - m]
        servers = np.concatenate([np.arange(m), np.sort(others)])
        caps = np.zeros(n, dtype=np.int64)
        caps[servers] = int(round(self.r * k))
        if self.kind == "server_client":
            extra = int(math.floor(self.alpha * n * k + 1e-9))
            np.add.at(caps, servers[rng.integers(0, len(servers), extra)], 1)
        return caps


@dataclass(frozen=True)
class SimConfig:
    n: int = 1000
    m: int = 2
    k: int = 2
    profile: DegreeProfile = field(default_factory=DegreeProfile.tight)
    depth_mode: DepthMode = DepthMode.DISTRIBUTED
    horizon: float = 100.0
    record_interval: float = 1.0
    seed: int = 0
    clock_rate: float = 1.0

    def validate(self) -> SimConfig:
        if self.n < 2:
            raise ConfigError(f"need at least 2 nodes, got {self.n}")
        if not 1 <= self.k <= self.m:
            raise ConfigError(f"need 1 <= K <= M, got K={self.k} M={self.m}")
        if self.m >= self.n:
            raise ConfigError(f"need M < N so roots have non-root children, got M={self.m} N={self.n}")
        if self.horizon < 0:
            raise ConfigError(f"horizon must be >= 0, got {self.horizon}")
        if self.record_interval <= 0:
            raise ConfigError(f"record interval must be > 0, got {self.record_interval}")
        if self.clock_rate <= 0:
            raise ConfigError(f"clock rate must be > 0, got {self.clock_rate}")
        self.profile.validate(self.n, self.m, self.k)
        return self

    def with_seed(self, seed) -> SimConfig:
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["depth_mode"] = self.depth_mode.value
        return d


@dataclass(frozen=True)
class EventRecord:
    time: float
    sampler: int
    target: int
    outcome: RuleOutcome


@dataclass(frozen=True)
class PotentialTriple:
    edges: int
    y: int
    s: int

    def key(self):
        """Lexicographic progress key; strictly decreases on every fired rule."""
        return (-self.edges, self.y, -self.s)


@dataclass(frozen=True)
class MetricSample:
    time: float
    fraction_fully_covered: float
    max_tree_depth: int
    edges: int
    y: int
    s: int
    cycle_count: int
    buffered_depth_error: int

    @property
    def potential(self) -> PotentialTriple:
        return PotentialTriple(self.edges, self.y, self.s)

    CSV_HEADER = "t,fraction_covered,max_depth,edges,Y,S,cycles,buffered_depth_error"

    def csv_row(self) -> str:
        return (f"{self.time:g},{self.fraction_fully_covered:.6f},{self.max_tree_depth},"
                f"{self.edges},{self.y},{self.s},{self.cycle_count},{self.buffered_depth_error}")


def rng_for(seed: int, run_index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(run_index,))))


def init_state(config: SimConfig, rng: np.random.Generator) -> GraphState:
    """Empty overlay plus one root-to-random-non-root link per color."""
    config.validate()
    n, m, k = config.n, config.m, config.k
    caps = config.profile.assign(n, m, k, rng)
    for i in range(m):
        if caps[i] < 1:
            raise ConfigError(f"root {i + 1} has degree cap {caps[i]}; roots need at least 1")
    state = GraphState(n, m, k, caps)
    for i in range(1, m + 1):
        for _ in range(1000):
            v = int(rng.integers(m, n)) + 1
            if state.in_degree(v) < k:
                break
        else:
            raise ConfigError(f"could not place the first child of root {i}")
        build_link(state, i, v, i)
    g = state.arrays
    for u in range(n):
        K.depth_update_all(g, u, config.depth_mode.inst)
    return state


def sample_metrics(state: GraphState, t: float) -> MetricSample:
    frac, maxd, cycles, err = K.record_row(state.arrays)
    s = state.arrays.scal
    return MetricSample(float(t), float(frac), int(maxd), int(s[K.EDGES]), int(s[K.YSUM]),
                        int(s[K.SSUM]), int(cycles), int(err))


class Simulation:
    """One seeded run. ``step`` and ``advance_to`` share the same event stream."""

    def __init__(self, config: SimConfig, run_index: int = 0, rules: int = ALL_RULES):
        self.config = config.validate()
        self.run_index = run_index
        self.rules = rules
        self.rng = rng_for(config.seed, run_index)
        self.state = init_state(config, self.rng)
        self.time = 0.0
        self.events = 0
        self.counts = np.zeros(K.N_CODES, dtype=np.int64)
        self._inst = config.depth_mode.inst
        self._idx = BLOCK
        self._dts = self._smp = self._tgt = None

    def _refill(self):
        n = self.config.n
        self._dts = self.rng.exponential(1.0 / (n * self.config.clock_rate), BLOCK)
        self._smp = self.rng.integers(0, n, BLOCK)
        r = self.rng.integers(0, n - 1, BLOCK)
        self._tgt = r + (r >= self._smp)
        self._idx = 0

    def step(self) -> EventRecord:
        if self._idx >= BLOCK:
            self._refill()
        i = self._idx
        self.time += float(self._dts[i])
        u, v = int(self._smp[i]), int(self._tgt[i])
        r = K.on_sample(self.state.arrays, u, v, self.rules, self._inst)
        self.counts[r[0]] += 1
        self._idx += 1
        self.events += 1
        return EventRecord(self.time, u + 1, v + 1, RuleOutcome.from_code(r))

    def advance_to(self, t_stop: float) -> None:
        """Process every event with time <= ``t_stop``."""
        while True:
            if self._idx >= BLOCK:
                self._refill()
            start = self._idx
            idx, t = K.advance(self.state.arrays, self.rules, self._inst, self._dts, self._smp,
                               self._tgt, start, self.time, t_stop, self.counts)
            self.events += idx - start
            self._idx, self.time = int(idx), float(t)
            if idx < BLOCK:
                return

    def run_until_shallow(self, threshold: int, max_time: float) -> float:
        """Time at which every node of color 1 first sits at depth <=
        ``threshold``; ``inf`` if that does not happen by ``max_time``."""
        g = self.state.arrays
        if K.nodes_deeper_than(g, 0, threshold) == 0:
            return self.time
        while self.time <= max_time:
            if self._idx >= BLOCK:
                self._refill()
            start = self._idx
            idx, t, reached = K.advance_until_shallow(g, self.rules, self._dts, self._smp,
                                                      self._tgt, start, self.time, threshold)
            self.events += idx - start
            self._idx, self.time = int(idx), float(t)
            if reached:
                return self.time if self.time <= max_time else math.inf
        return math.inf

    def record_times(self) -> np.ndarray:
        c = self.config
        count = int(math.floor(c.horizon / c.record_interval + 1e-9))
        return np.arange(count + 1) * c.record_interval

    def run(self) -> list[MetricSample]:
        samples = []
        for t in self.record_times():
            self.advance_to(float(t))
            samples.append(sample_metrics(self.state, float(t)))
        return samples


def run(config: SimConfig, run_index: int = 0) -> tuple[list[MetricSample], GraphState]:
    sim = Simulation(config, run_index)
    samples = sim.run()
    return samples, sim.state
