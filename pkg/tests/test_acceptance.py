"""Acceptance suite. Each test prints one ``criterion N: PASS|FAIL`` line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or as a script
(``python -m tests.test_acceptance``) to get just the verdict lines.
Criteria 1-3 and 8 run the full 500-run / 50-run batches at N=1000 and take
a few minutes on one core.
"""

import functools
import math

import numpy as np
import pytest

from multitree import DegreeProfile, DepthMode, SimConfig, Simulation
from multitree.experiments import BatchSpec, bound_experiment, run_batch, scenario
from multitree.graph import all_true_depths, check_assumption1
from multitree.metrics import converged_state_report, is_converged, potential
from multitree.protocol import Rule

pytestmark = pytest.mark.slow

INST = DepthMode.INSTANTANEOUS
JOBS = 1


def report(capsys, number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return ok


@functools.lru_cache(maxsize=None)
def tight_batch():
    spec = scenario("tight", k=2, m=2, repeats=500)
    spec = BatchSpec(spec.base, spec.repeats, spec.percentiles,
                     ("fraction_fully_covered", "max_tree_depth", "cycle_count"))
    return run_batch(spec, jobs=JOBS)


@functools.lru_cache(maxsize=None)
def loose_batch():
    return run_batch(scenario("loose", k=2, m=2, alpha=0.1, repeats=500), jobs=JOBS)


def at(result, metric, pct, t):
    c = result.curve(metric, pct)
    return float(c.values[int(np.flatnonzero(c.times == t)[0])])


# ------------------------------------------------------------------------ 1

def criterion_1():
    cov25 = at(tight_batch(), "fraction_fully_covered", 1.0, 25)
    return cov25 >= 0.85, f"1%-worst coverage at t=25 is {cov25:.4f} (need >= 0.85)"


# ------------------------------------------------------------------------ 2

def criterion_2():
    d25 = at(tight_batch(), "max_tree_depth", 1.0, 25)
    d100 = at(tight_batch(), "max_tree_depth", 1.0, 100)
    ok = d25 <= 22 and d100 <= 14
    return ok, f"1%-worst max depth {d25:g} at t=25 (<= 22), {d100:g} at t=100 (<= 14)"


# ------------------------------------------------------------------------ 3

def criterion_3():
    c = loose_batch().curve("fraction_fully_covered", 1.0)
    full = np.flatnonzero(c.values >= 1.0)
    t_full = float(c.times[full[0]]) if full.size else math.inf
    return t_full <= 30, f"1%-worst coverage first reaches 1.0 at t={t_full:g} (need <= 30)"


# ------------------------------------------------------------------------ 4

def criterion_4():
    parts, ok = [], True
    for n in (64, 256, 1024):
        res = bound_experiment(n, 200, seed=0, epsilons=(1, 2, 3))
        tails_ok = all(res.empirical_tail[e] < 3 * math.exp(-e) for e in res.epsilon_grid)
        med_ok = res.median < 21 * math.log2(n + 1)
        ok &= tails_ok and med_ok
        tails = "/".join(f"{res.empirical_tail[e]:.3f}" for e in res.epsilon_grid)
        parts.append(f"N={n} median={res.median:.1f} (< {21 * math.log2(n + 1):.1f}) tails={tails}")
    return ok, "; ".join(parts)


# ------------------------------------------------------------------------ 5

def criterion_5(seeds=10, horizon=100.0):
    fired = violations = 0
    by_rule = {}
    for run_index in range(seeds):
        sim = Simulation(SimConfig(n=200, m=2, k=2, depth_mode=INST, horizon=horizon), run_index)
        prev = potential(sim.state)
        while True:
            e = sim.step()
            if e.time > horizon:
                break
            out = e.outcome
            if not out.changed:
                continue
            cur = potential(sim.state)
            de, dy, ds = cur.edges - prev.edges, cur.y - prev.y, cur.s - prev.s
            if out.rule in (Rule.ADD, Rule.INSERT):
                pattern = de == 1
            elif out.rule is Rule.MIXSWAP and out.clause == "b":
                pattern = de == 0 and dy == 0 and ds > 0
            else:
                pattern = de == 0 and dy < 0
            if not (pattern and cur.key() < prev.key()):
                violations += 1
            key = out.rule.value + (f"({out.clause})" if out.clause else "")
            by_rule[key] = by_rule.get(key, 0) + 1
            fired += 1
            prev = cur
    counts = ",".join(f"{k}={v}" for k, v in sorted(by_rule.items()))
    return violations == 0, f"{fired} fired rules over {seeds} runs, {violations} violations ({counts})"


# ------------------------------------------------------------------------ 6

def criterion_6(runs=20, horizon=500.0):
    failures = []
    cs = []
    for run_index in range(runs):
        sim = Simulation(SimConfig(n=100, m=2, k=2, depth_mode=INST, horizon=horizon), run_index)
        sim.advance_to(horizon)
        rep = converged_state_report(sim.state, INST)
        cs.append(rep.shower_head)
        if not rep.passed:
            bad = [f"{name} ({len(c.witnesses)} witnesses)" for name, c in rep.checks.items() if not c.passed]
            if not rep.converged:
                bad.insert(0, "not converged")
            failures.append(f"run {run_index}: {', '.join(bad)}")
    detail = f"{runs - len(failures)}/{runs} runs converged with checks (a)-(d) and depth bound, c in {sorted(set(cs))}"
    if failures:
        detail += "; " + "; ".join(failures)
    return not failures, detail


# ------------------------------------------------------------------------ 7

def is_perfect_binary_tree(state, levels):
    depth = all_true_depths(state)[:, 0]
    if not np.isfinite(depth).all():
        return False
    if np.bincount(depth.astype(int)).tolist() != [2 ** d for d in range(levels + 1)]:
        return False
    return all(state.out_degree(u, 1) == (2 if depth[u - 1] < levels else 0)
               for u in range(1, state.n + 1))


def criterion_7(runs=5, limit=5000.0):
    results = []
    for run_index in range(runs):
        cfg = SimConfig(n=127, m=1, k=1, profile=DegreeProfile.explicit([2] * 127), depth_mode=INST)
        sim = Simulation(cfg, run_index)
        while sim.time < limit and not is_converged(sim.state, INST):
            sim.advance_to(sim.time + 10)
        results.append((is_converged(sim.state, INST) and is_perfect_binary_tree(sim.state, 6), sim.time))
    ok = all(r for r, _ in results)
    times = ", ".join(f"{t:g}" for _, t in results)
    return ok, f"{sum(r for r, _ in results)}/{runs} runs converged to a perfect depth-6 tree (t = {times})"


# ------------------------------------------------------------------------ 8

def criterion_8(runs=50):
    res = tight_batch()
    cov = res.series["fraction_fully_covered"][:runs]
    cyc = res.series["cycle_count"][:runs]
    final_cycles = int((cyc[:, -1] > 0).sum())
    full = float((cov[:, -1] >= 1.0).mean())
    drops = np.clip(cov[:, :-1] - cov[:, 1:], 0, None).sum(axis=1)
    worst_drop = float(drops.max())
    ok = final_cycles == 0 and full >= 0.95 and worst_drop <= 0.02
    detail = (f"runs with cycles at t=100: {final_cycles}/{runs}; fully covered at t=100: {full:.0%} "
              f"(need >= 95%, final coverage min {cov[:, -1].min():.3f} median {np.median(cov[:, -1]):.3f}); "
              f"worst summed coverage drop {worst_drop * 1000:.0f} nodes (<= 20); "
              f"peak cycles {int(cyc.max())}")
    return ok, detail


# ------------------------------------------------------------------------ 9

SCENARIO_ARGS = [
    ("tight", {}),
    ("source_coding", {"m": 4}),
    ("loose", {"alpha": 0.1}),
    ("server_client", {"r": 2, "alpha": 0.1}),
    ("polarized", {"r": 2, "alpha": 0.1}),
]


def conservation_errors(before, after, out):
    """Link-count changes a balance or mix-swap rule is not allowed to make."""
    errs = []
    if not np.array_equal(before["inc"], after["inc"]):
        errs.append("per-node incoming colors changed")
    if not np.array_equal(before["dcount"].sum(axis=0), after["dcount"].sum(axis=0)):
        errs.append("per-color link totals changed")
    delta = after["dcount"] - before["dcount"]
    if out.rule is Rule.LEAFSWAP and delta.any():
        errs.append("leafswap changed a node's outgoing counts")
    if out.rule is Rule.JUMP:
        (old, _, i), _ = out.affected[0]
        (new, _, _), _ = out.affected[1]
        expect = np.zeros_like(delta)
        expect[old - 1, i - 1] = -1
        expect[new - 1, i - 1] = 1
        if not np.array_equal(delta, expect):
            errs.append("jump moved more than one outgoing link")
    if out.rule is Rule.MIXSWAP and (delta.sum(axis=1) != 0).any():
        errs.append("mix swap changed a node's total out-degree")
    return errs


def snapshot(g):
    return {"inc": g.parent != -1, "dcount": g.dcount.copy(), "parent": g.parent.copy()}


def criterion_9(events_per_case=10_000):
    total = a1_bad = cons_bad = fired = rewired = 0
    for mode in DepthMode:
        for name, kw in SCENARIO_ARGS:
            spec = scenario(name, n=100, depth_mode=mode, **kw)
            sim = Simulation(spec.base.with_seed(0))
            g = sim.state.arrays
            prev = snapshot(g)
            for _ in range(events_per_case):
                out = sim.step().outcome
                total += 1
                cur = snapshot(g)
                if not out.changed:
                    if not np.array_equal(prev["parent"], cur["parent"]):
                        a1_bad += 1
                    continue
                fired += 1
                if not check_assumption1(sim.state).ok:
                    a1_bad += 1
                if out.rule not in (Rule.ADD, Rule.INSERT):
                    rewired += 1
                    cons_bad += bool(conservation_errors(prev, cur, out))
                prev = cur
    ok = a1_bad == 0 and cons_bad == 0
    return ok, (f"{total} events ({fired} fired, {rewired} balance/mix) over 2 modes x 5 scenarios: "
                f"{a1_bad} assumption-1 violations, {cons_bad} conservation violations")


# ---------------------------------------------------------------- pytest glue

CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("number", range(1, 10))
def test_criterion(number, capsys):
    ok, detail = CRITERIA[number - 1]()
    assert report(capsys, number, ok, detail), detail


if __name__ == "__main__":
    for k, fn in enumerate(CRITERIA, 1):
        report(None, k, *fn())
