"""Steps per second of the trajectory kernel, numba vs the interpreted fallback.

    python benchmarks/bench_backends.py [--steps N]

Each backend runs in its own interpreter because the choice is fixed at import.
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
from normdiff import backend_name
from normdiff.dynamics import Steps, make_rng, run
from normdiff.graphs import close_knit_ratio, cycle
from normdiff.model import ModelParams, PayoffMatrix, all_b
from normdiff.schedulers import ContagionScheduler, RandomScheduler

steps = int(sys.argv[1])
g = cycle(64)
pay = PayoffMatrix(2, 1, 0, 0)
out = {"backend": backend_name()}
for name, sched in (("random", RandomScheduler()), ("contagion", ContagionScheduler.neighbor_walk(g))):
    run(g, pay, all_b(64), sched, ModelParams(2.0), Steps(100), make_rng(0))  # compile / warm up
    t = time.perf_counter()
    run(g, pay, all_b(64), sched, ModelParams(2.0), Steps(steps), make_rng(1))
    out[name] = steps / (time.perf_counter() - t)
close_knit_ratio(g, range(4))
t = time.perf_counter()
close_knit_ratio(g, range(18))
out["close_knit_18"] = time.perf_counter() - t
print(json.dumps(out))
"""


def measure(disable, steps):
    env = dict(os.environ, NORMDIFF_DISABLE_NUMBA="1" if disable else "0")
    proc = subprocess.run([sys.executable, "-c", WORKER, str(steps)], env=env, check=True,
                          capture_output=True, text=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000)
    args = ap.parse_args()
    fast = measure(False, args.steps)
    slow = measure(True, args.steps)
    print(f"{'kernel':<16}{'numba':>14}{'python':>14}{'speedup':>10}")
    for key in ("random", "contagion"):
        print(f"{key + ' steps/s':<16}{fast[key]:>14.3g}{slow[key]:>14.3g}{fast[key] / slow[key]:>10.1f}")
    k = "close_knit_18"
    print(f"{'close-knit |S|=18 s':<16}{fast[k]:>14.3g}{slow[k]:>14.3g}{slow[k] / fast[k]:>10.1f}")


if __name__ == "__main__":
    main()
