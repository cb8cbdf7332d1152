"""Compare the numba-compiled kernels with the pure-numpy fallback.

Each variant runs in its own interpreter, because the backend is chosen
at import time from ``CTEMPLATES_DISABLE_NUMBA``.

    python3 benchmarks/bench_kernels.py [--horizon 1.0] [--repeat 3]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import numpy as np
from ctemplates import _kernels
from ctemplates.config import load_example
from ctemplates.hybridloop import simulate
from ctemplates.sysmodel import InputSignal, gramian
from ctemplates.templates import certify_template

horizon, repeat = float(sys.argv[1]), int(sys.argv[2])
cfg = load_example()
u = InputSignal(np.linspace(0, 1, 11), np.random.default_rng(0).uniform(-1, 1, (10, 2)))

def sim():
    simulate(cfg.system, cfg.family, cfg.feedback, cfg.theta, cfg.delta, cfg.loop_state(), horizon)

def cert():
    certify_template(cfg.system, cfg.family, cfg.delta, 50.0, mu_grid=10, rot_grid=16)

def gram():
    for _ in range(50):
        gramian(cfg.system, u, 0.0, 1.0)

start = time.perf_counter()
sim(); cert(); gram()
warmup = time.perf_counter() - start
out = {"numba": _kernels.USING_NUMBA, "first_call_s": warmup}
for name, fn in (("simulate", sim), ("certify", cert), ("gramian_x50", gram)):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    out[name] = best
print(json.dumps(out))
"""


def run(disable: bool, horizon: float, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("CTEMPLATES_DISABLE_NUMBA", None)
    if disable:
        env["CTEMPLATES_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKLOAD, str(horizon), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=float, default=1.0, help="simulated closed-loop time")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run(False, args.horizon, args.repeat)
    slow = run(True, args.horizon, args.repeat)
    if not fast["numba"]:
        print("numba is not installed; both runs use the numpy fallback")
    print(f"{'workload':<14}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for key in ("simulate", "certify", "gramian_x50"):
        print(f"{key:<14}{fast[key]:>12.4f}{slow[key]:>12.4f}{slow[key] / fast[key]:>9.1f}x")
    print(f"{'first call':<14}{fast['first_call_s']:>12.4f}{slow['first_call_s']:>12.4f}")


if __name__ == "__main__":
    main()
