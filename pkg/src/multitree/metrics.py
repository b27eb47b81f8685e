"""Ground-truth metrics, the lexicographic potential and the convergence
detector. Everything here recomputes depths with the BFS oracle instead of
trusting the kernel's incremental cache.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from .graph import GraphState, all_true_depths
from .protocol import ALL_RULES, DepthMode, RuleOutcome
from .sim import PotentialTriple


def fraction_fully_covered(state: GraphState) -> float:
    depths = all_true_depths(state)
    covered = np.isfinite(depths).sum(axis=1)
    return float((covered >= state.k).sum()) / state.n


@dataclass(frozen=True)
class DepthSummary:
    per_color: dict[int, int]
    overall: int
    uncovered: dict[int, int]


def max_tree_depth(state: GraphState) -> DepthSummary:
    depths = all_true_depths(state)
    per, unc = {}, {}
    for i in range(1, state.m + 1):
        col = depths[:, i - 1]
        fin = col[np.isfinite(col)]
        per[i] = int(fin.max())
        unc[i] = int((~np.isfinite(col)).sum())
    return DepthSummary(per, max(per.values()), unc)


def potential(state: GraphState) -> PotentialTriple:
    n = state.n
    depths = all_true_depths(state)
    y = int(np.minimum(depths, n).sum())
    s = sum(u * i for i, u, _ in state.links())
    return PotentialTriple(len(state.links()), y, s)


def find_active_pair(state: GraphState, mode: DepthMode, rules: int = ALL_RULES):
    """First ordered pair that would still trigger a rule, or ``None``.

    Works on a copy whose buffered depths were settled in ``mode`` first.
    Returns ``(u, v, outcome)`` with 1-based ids.
    """
    probe = state.copy()
    K.settle_buffers(probe.arrays, mode.inst, state.n + 1)
    u, v, _ = K.find_active_pair(probe.arrays, rules, mode.inst)
    if u < 0:
        return None
    r = K.try_rules(probe.arrays, u, v, rules, mode.inst, False)
    return int(u) + 1, int(v) + 1, RuleOutcome.from_code(r)


def is_converged(state: GraphState, mode: DepthMode = DepthMode.INSTANTANEOUS,
                 rules: int = ALL_RULES) -> bool:
    return find_active_pair(state, mode, rules) is None


def shower_head_constant(state: GraphState) -> int:
    """Smallest c such that in every tree the nodes at depth <= c include at
    least M leaves of the truncated tree (nodes at depth c count as leaves)."""
    depths = all_true_depths(state)
    m = state.m
    worst = 0
    for i in range(1, m + 1):
        col = depths[:, i - 1]
        fin = col[np.isfinite(col)].astype(int)
        if fin.size == 0:
            continue
        levels = np.bincount(fin)
        leaf_at = np.zeros_like(levels)
        for u in np.flatnonzero(np.isfinite(col)):
            if state.out_degree(int(u) + 1, i) == 0:
                leaf_at[int(col[u])] += 1
        c = len(levels) - 1
        shallow_leaves = 0
        for d in range(len(levels)):
            if shallow_leaves + levels[d] >= m:
                c = d
                break
            shallow_leaves += leaf_at[d]
        worst = max(worst, c)
    return worst


@dataclass
class CheckResult:
    passed: bool
    witnesses: list = field(default_factory=list)


@dataclass
class ConvergedReport:
    converged: bool
    checks: dict[str, CheckResult]
    shower_head: int
    depth_bound: float

    @property
    def passed(self) -> bool:
        return self.converged and all(c.passed for c in self.checks.values())

    def lines(self) -> list[str]:
        out = [f"converged: {'PASS' if self.converged else 'FAIL'}"]
        for name, c in self.checks.items():
            line = f"{name}: {'PASS' if c.passed else 'FAIL'}"
            if c.witnesses:
                line += f"  witnesses={c.witnesses[:5]}"
            out.append(line)
        out.append(f"shower-head c={self.shower_head} depth bound={self.depth_bound:.3f}")
        return out


def converged_state_report(state: GraphState, mode: DepthMode = DepthMode.INSTANTANEOUS,
                           c: int | None = None) -> ConvergedReport:
    """Structural checks that must hold once no rule can fire:

    coverage (every node in exactly K trees), leaf balance (leaf depths
    within 1 per tree), internal nodes saturated with a child in their tree,
    mixed-node depth pairs totally ordered, and the logarithmic depth bound.
    """
    n, m, k = state.n, state.m, state.k
    depths = all_true_depths(state)
    fin = np.isfinite(depths)
    checks: dict[str, CheckResult] = {}

    bad = [u for u in range(1, n + 1) if int(fin[u - 1].sum()) != k]
    checks["coverage"] = CheckResult(not bad, bad)

    bad = []
    max_depth = {}
    for i in range(1, m + 1):
        col = depths[:, i - 1]
        max_depth[i] = int(col[fin[:, i - 1]].max())
        leaves = [(int(col[u - 1]), u) for u in range(1, n + 1)
                  if fin[u - 1, i - 1] and state.out_degree(u, i) == 0]
        if leaves and max(leaves)[0] - min(leaves)[0] > 1:
            bad.append((i, min(leaves)[1], max(leaves)[1]))
    checks["leaf_balance"] = CheckResult(not bad, bad)

    bad = []
    for i in range(1, m + 1):
        for u in range(1, n + 1):
            d = depths[u - 1, i - 1]
            if np.isfinite(d) and d + 2 <= max_depth[i]:
                if state.is_available(u) or state.out_degree(u, i) < 1:
                    bad.append((i, u))
    checks["internal_saturated"] = CheckResult(not bad, bad)

    bad = []
    for i in range(1, m + 1):
        for j in range(i + 1, m + 1):
            mixed = [u for u in range(1, n + 1)
                     if state.out_degree(u, i) > 0 and state.out_degree(u, j) > 0]
            for a_idx, a in enumerate(mixed):
                pa = depths[a - 1, [i - 1, j - 1]]
                for b in mixed[a_idx + 1:]:
                    pb = depths[b - 1, [i - 1, j - 1]]
                    if not ((pa < pb).all() or (pb < pa).all()):
                        bad.append((i, j, a, b))
    checks["mixed_chain"] = CheckResult(not bad, bad)

    c = shower_head_constant(state) if c is None else c
    bound = math.log2(n + 1) + c
    bad = [(i, d) for i, d in max_depth.items() if d > bound]
    checks["depth_bound"] = CheckResult(not bad, bad)

    return ConvergedReport(is_converged(state, mode), checks, c, bound)
