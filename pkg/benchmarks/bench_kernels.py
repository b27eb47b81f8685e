"""Compare the numba kernels with the pure-python fallback.

Each backend runs in its own interpreter because the choice is fixed at
import time by ``MULTITREE_DISABLE_NUMBA``. Both runs must produce the same
final state; the script exits non-zero if they differ.

    python benchmarks/bench_kernels.py --nodes 1000 --horizon 20
"""

import argparse
import json
import os
import subprocess
import sys
from pathlib import Path

SRC = str(Path(__file__).resolve().parents[1] / "src")

CHILD = r"""
import json, sys, time
import multitree
from multitree import SimConfig, Simulation, DepthMode
from multitree.graph import dumps

n, horizon, seed, mode = int(sys.argv[1]), float(sys.argv[2]), int(sys.argv[3]), sys.argv[4]
cfg = SimConfig(n=n, horizon=horizon, seed=seed, depth_mode=DepthMode(mode))
warm = Simulation(SimConfig(n=20, horizon=1.0, depth_mode=DepthMode(mode)))
warm.advance_to(1.0)
t0 = time.perf_counter()
sim = Simulation(cfg)
sim.advance_to(horizon)
wall = time.perf_counter() - t0
print(json.dumps({"backend": multitree.BACKEND, "wall_s": wall, "events": sim.events,
                  "state": dumps(sim.state)}))
"""


def run_backend(disable, args):
    env = {**os.environ, "PYTHONPATH": SRC, "MULTITREE_DISABLE_NUMBA": "1" if disable else "0"}
    proc = subprocess.run([sys.executable, "-c", CHILD, str(args.nodes), str(args.horizon),
                           str(args.seed), args.depth_mode],
                          capture_output=True, text=True, env=env, check=True)
    return json.loads(proc.stdout)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--nodes", type=int, default=1000)
    p.add_argument("--horizon", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--depth-mode", default="distributed", choices=["distributed", "instantaneous"])
    args = p.parse_args(argv)

    fast = run_backend(False, args)
    slow = run_backend(True, args)
    for r in (fast, slow):
        rate = r["events"] / r["wall_s"]
        print(f"{r['backend']:>6}: {r['wall_s']:8.3f} s  {r['events']:>9d} events  {rate:12.0f} events/s")
    print(f"speedup: {slow['wall_s'] / fast['wall_s']:.1f}x")
    same = fast["state"] == slow["state"]
    print(f"final states identical: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
