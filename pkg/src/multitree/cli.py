"""Command-line front end.

    multitree run    --nodes 1000 --colors 2 --need 2 --profile tight --horizon 100 --seed 7
    multitree batch  --scenario tight --repeats 500 --percentiles 0.2,1,5,50,100
    multitree bound  --nodes-list 64,256,1024 --trials 200 --epsilons 1,2,3
    multitree check  --state final_state.txt

Exit codes: 0 success, 1 a check failed, 2 usage/config/parse error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .experiments import DEFAULT_PERCENTILES, SCENARIOS, BatchSpec, bound_experiment, bound_threshold, run_batch, scenario
from .graph import StateFormatError, check_assumption1, dumps, loads
from .metrics import converged_state_report
from .protocol import DepthMode
from .sim import ConfigError, DegreeProfile, MetricSample, SimConfig, Simulation

PROFILES = ("tight", "loose", "server_client", "polarized")

# config-file key -> (type, default)
KEYS = {
    "nodes": (int, 1000),
    "colors": (int, None),  # defaults to --need
    "need": (int, 2),
    "profile": (str, "tight"),
    "alpha": (float, 0.0),
    "r": (float, 2.0),
    "horizon": (float, 100.0),
    "record_interval": (float, 1.0),
    "seed": (int, None),
    "depth_mode": (str, "distributed"),
    "clock_rate": (float, 1.0),
    "scenario": (str, None),
    "repeats": (int, 500),
    "percentiles": (str, "0.2,1,5,50,100"),
    "jobs": (int, 1),
}


class UsageError(Exception):
    pass


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"--config: cannot read {path}: {e.strerror}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"--config {path} line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in KEYS:
            raise UsageError(f"--config {path} line {lineno}: unknown key {key!r}")
        try:
            out[key] = KEYS[key][0](value)
        except ValueError:
            raise UsageError(f"--config {path} line {lineno}: bad value for {key}: {value!r}") from None
    return out


def resolve(args) -> dict:
    """Defaults < MULTITREE_SEED (seed only) < config file < explicit flags."""
    values = {k: d for k, (_, d) in KEYS.items()}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    if values["seed"] is None:
        env = os.environ.get("MULTITREE_SEED")
        try:
            values["seed"] = int(env) if env else 0
        except ValueError:
            raise UsageError(f"MULTITREE_SEED must be an integer, got {env!r}") from None
    for key in KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return values


def _float_list(flag, text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{flag}: expected comma-separated numbers, got {text!r}") from None


def build_config(v: dict) -> SimConfig:
    n, k = v["nodes"], v["need"]
    m = k if v["colors"] is None else v["colors"]
    if n < 2:
        raise UsageError(f"--nodes must be >= 2, got {n}")
    if m < 1 or m >= n:
        raise UsageError(f"--colors must be in [1, nodes), got {m}")
    if k < 1 or k > m:
        raise UsageError(f"--need ({k}) must be between 1 and --colors ({m})")
    if v["horizon"] < 0:
        raise UsageError(f"--horizon must be >= 0, got {v['horizon']}")
    if v["record_interval"] <= 0:
        raise UsageError(f"--record-interval must be > 0, got {v['record_interval']}")
    if v["alpha"] < 0:
        raise UsageError(f"--alpha must be >= 0, got {v['alpha']}")
    if v["profile"] not in PROFILES:
        raise UsageError(f"--profile must be one of {', '.join(PROFILES)}")
    try:
        mode = DepthMode(v["depth_mode"])
    except ValueError:
        raise UsageError(f"--depth-mode must be instantaneous or distributed, got {v['depth_mode']!r}") from None
    profile = {
        "tight": lambda: DegreeProfile.tight(),
        "loose": lambda: DegreeProfile.loose(v["alpha"]),
        "server_client": lambda: DegreeProfile.server_client(v["r"], v["alpha"]),
        "polarized": lambda: DegreeProfile.polarized(v["r"], v["alpha"]),
    }[v["profile"]]()
    cfg = SimConfig(n=n, m=m, k=k, profile=profile, depth_mode=mode, horizon=v["horizon"],
                    record_interval=v["record_interval"], seed=v["seed"], clock_rate=v["clock_rate"])
    return cfg.validate()


# ------------------------------------------------------------------ verbs


def cmd_run(args) -> int:
    cfg = build_config(resolve(args))
    sim = Simulation(cfg)
    samples = sim.run()
    out = Path(args.out)
    rows = [MetricSample.CSV_HEADER] + [s.csv_row() for s in samples]
    write_atomic(out / "metrics.csv", "\n".join(rows) + "\n")
    write_atomic(out / "final_state.txt", dumps(sim.state))
    last = samples[-1]
    print(f"t={last.time:g} covered={last.fraction_fully_covered:.4f} "
          f"max_depth={last.max_tree_depth} events={sim.events} -> {out}")
    return 0


def _fmt(x: float) -> str:
    return f"{x:g}"


def cmd_batch(args) -> int:
    v = resolve(args)
    percentiles = tuple(_float_list("--percentiles", v["percentiles"]))
    if not percentiles or any(not 0 < p <= 100 for p in percentiles):
        raise UsageError("--percentiles must be values in (0, 100]")
    if v["repeats"] < 1:
        raise UsageError(f"--repeats must be >= 1, got {v['repeats']}")
    if v["jobs"] < 1:
        raise UsageError(f"--jobs must be >= 1, got {v['jobs']}")
    if v["scenario"] is not None:
        if v["scenario"] not in SCENARIOS:
            raise UsageError(f"--scenario must be one of {', '.join(SCENARIOS)}")
        spec = scenario(v["scenario"], k=v["need"], m=v["colors"], alpha=v["alpha"], r=v["r"],
                        n=v["nodes"], repeats=v["repeats"], seed=v["seed"], horizon=v["horizon"],
                        depth_mode=DepthMode(v["depth_mode"]))
        label = v["scenario"]
    else:
        spec = BatchSpec(build_config(v), repeats=v["repeats"])
        label = v["profile"]
    spec = BatchSpec(spec.base, spec.repeats, percentiles, spec.metrics).validate()
    result = run_batch(spec, jobs=v["jobs"])
    out = Path(args.out)
    names = {"fraction_fully_covered": "coverage", "max_tree_depth": "max_depth"}
    header = "t," + ",".join(f"p{_fmt(p)}" for p in percentiles)
    for metric, short in names.items():
        curves = result.curves[metric]
        rows = [header]
        for idx, t in enumerate(result.times):
            rows.append(",".join([_fmt(t)] + [_fmt(float(c.values[idx])) for c in curves]))
        write_atomic(out / f"{label}_{short}.csv", "\n".join(rows) + "\n")
    summary = result.summary()
    if args.deterministic:
        del summary["wall_time_s"]
    write_atomic(out / f"{label}_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"{label}: {spec.repeats} runs in {result.wall_time:.1f}s -> {out}")
    return 0


def cmd_bound(args) -> int:
    try:
        nodes = [int(x) for x in args.nodes_list.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--nodes-list: expected comma-separated integers, got {args.nodes_list!r}") from None
    eps = _float_list("--epsilons", args.epsilons)
    if not nodes or min(nodes) < 2:
        raise UsageError("--nodes-list values must be >= 2")
    if args.trials < 1:
        raise UsageError(f"--trials must be >= 1, got {args.trials}")
    if not eps or min(eps) <= 0:
        raise UsageError("--epsilons values must be > 0")
    seed = resolve(args)["seed"]
    rows = ["N,trial,T"]
    summary = {"seed": seed, "trials": args.trials, "results": []}
    for n in nodes:
        res = bound_experiment(n, args.trials, seed=seed, epsilons=eps)
        rows += [f"{n},{t},{_fmt(float(T))}" for t, T in enumerate(res.t_samples)]
        summary["results"].append({
            "N": n,
            "median_T": res.median,
            "tail": [{"epsilon": e, "threshold": bound_threshold(n, e),
                      "empirical": res.empirical_tail[e], "bound": 3 * math.exp(-e),
                      "below_bound": res.empirical_tail[e] < 3 * math.exp(-e)}
                     for e in res.epsilon_grid],
        })
        print(f"N={n}: median T={res.median:.2f} tail={res.empirical_tail}")
    out = Path(args.out)
    write_atomic(out / "bound_trials.csv", "\n".join(rows) + "\n")
    write_atomic(out / "bound_summary.json", json.dumps(summary, indent=2) + "\n")
    return 0


def cmd_check(args) -> int:
    try:
        text = Path(args.state).read_text()
    except OSError as e:
        print(f"error: cannot read {args.state}: {e.strerror}", file=sys.stderr)
        return 2
    try:
        state = loads(text)
    except StateFormatError as e:
        print(f"error: {args.state}: {e}", file=sys.stderr)
        return 2
    rep = check_assumption1(state)
    for line in rep.lines():
        print(line)
    if not rep.ok:
        return 1
    report = converged_state_report(state, DepthMode(args.depth_mode))
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


# ------------------------------------------------------------------ parser


def _add_sim_flags(p):
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--nodes", type=int)
    p.add_argument("--colors", type=int)
    p.add_argument("--need", type=int)
    p.add_argument("--profile", choices=PROFILES)
    p.add_argument("--alpha", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--record-interval", dest="record_interval", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--depth-mode", dest="depth_mode", choices=[m.value for m in DepthMode])
    p.add_argument("--clock-rate", dest="clock_rate", type=float)
    p.add_argument("--out", default=".")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multitree", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="single simulation run")
    _add_sim_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="repeated runs aggregated into percentile curves")
    _add_sim_flags(p)
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--repeats", type=int)
    p.add_argument("--percentiles", help=f"default {','.join(_fmt(x) for x in DEFAULT_PERCENTILES)}")
    p.add_argument("--jobs", type=int)
    p.add_argument("--deterministic", action="store_true",
                   help="omit wall time from the summary so outputs are byte-stable")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("bound", help="single-tree convergence-time trials")
    p.add_argument("--nodes-list", dest="nodes_list", default="64,256,1024")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--epsilons", default="1,2,3")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("check", help="validate a saved overlay state")
    p.add_argument("--state", required=True)
    p.add_argument("--depth-mode", dest="depth_mode", default="instantaneous",
                   choices=[m.value for m in DepthMode])
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
