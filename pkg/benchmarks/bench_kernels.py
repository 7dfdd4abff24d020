"""Compare the numba kernels with their numpy fallbacks.

Run ``python benchmarks/bench_kernels.py``. The first part times each kernel
pair in-process; the second times a full DM-LP and branch-and-bound solve in
two subprocesses, one with ``UAVRELAY_NO_NUMBA=1``.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from uavrelay import kernels
from uavrelay._accel import HAVE_NUMBA
from uavrelay.kernels import AT_LOWER, AT_UPPER, BASIC, FREE


def kernel_cases(rng, n):
    d = rng.normal(size=n)
    status = rng.choice([BASIC, AT_LOWER, AT_UPPER, FREE], size=n).astype(np.int8)
    m = n // 2
    xb = rng.uniform(0, 1, m)
    lb, ub = np.zeros(m), np.ones(m)
    alpha = rng.normal(size=m)
    basis = np.arange(m)
    count = 64
    eta_r = rng.integers(0, m, count)
    eta_piv = rng.uniform(0.5, 2.0, count)
    eta_ptr = np.arange(0, 8 * (count + 1), 8, dtype=np.int64)
    eta_idx = rng.integers(0, m, 8 * count)
    eta_val = rng.normal(size=8 * count)
    etas = (eta_r, eta_piv, eta_ptr, eta_idx, eta_val, count)
    pts = rng.uniform(0, 1e4, (n // 20, 2))
    return {
        "select_entering": lambda k: k.select_entering(d, status, 1e-9, False),
        "ratio_test": lambda k: k.ratio_test(xb, lb, ub, alpha, 1, basis, 1e-9, 1e-9, False),
        "ftran_etas": lambda k: k.ftran(xb.copy(), *etas),
        "btran_etas": lambda k: k.btran(xb.copy(), *etas),
        "pairwise_distances": lambda k: k.dist(pts, pts),
    }


class _Bound:
    def __init__(self, suffix):
        get = lambda name: getattr(kernels, f"{name}_{suffix}")  # noqa: E731
        self.select_entering = get("select_entering")
        self.ratio_test = get("ratio_test")
        self.ftran = get("ftran_etas")
        self.btran = get("btran_etas")
        self.dist = get("pairwise_distances")


_SOLVE = """
import json, time
from uavrelay.netgraph import build_demand_graph, build_grid, build_network_graph
from uavrelay.radio import PropagationParams, coverage_radii
from uavrelay.scenario import MobilityConfig, Region, build_scenario
from uavrelay.solvers import solve_dmlp, solve_milp
from uavrelay.uprmodel import SolveConfig
radii = coverage_radii(PropagationParams())
out = {}
for name, grid, m, solve in (("dmlp 6x6, 4 clusters", (6, 6), 4, solve_dmlp),
                             ("milp 5x5, 3 clusters", (5, 5), 3, solve_milp)):
    region = Region(6000.0, 6000.0) if grid == (6, 6) else Region(5000.0, 5000.0)
    sc = build_scenario(region=region, m=m, seed=4, mobility=MobilityConfig(num_snapshots=1))
    g = build_grid(region, *grid)
    net = build_network_graph(sc.snapshots[0], g, radii)
    dem = build_demand_graph(sc.snapshots[0])
    solve(net, dem, SolveConfig(n_max=4))  # warm-up (compilation, caches)
    t0 = time.perf_counter()
    dec = solve(net, dem, SolveConfig(n_max=4))
    out[name] = [time.perf_counter() - t0, dec.objective]
print(json.dumps(out))
"""


def end_to_end(no_numba: bool) -> dict:
    env = dict(os.environ)
    env.pop("UAVRELAY_NO_NUMBA", None)
    if no_numba:
        env["UAVRELAY_NO_NUMBA"] = "1"
    proc = subprocess.run([sys.executable, "-c", _SOLVE], capture_output=True, text=True,
                          env=env, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=4000, help="columns in the pricing vector")
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--skip-solves", action="store_true")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    cases = kernel_cases(rng, args.size)
    impls = {"numpy": _Bound("np")}
    if HAVE_NUMBA:
        impls["numba"] = _Bound("nb")
    print(f"{'kernel':<20} " + " ".join(f"{k + ' (us)':>12}" for k in impls) + "   speedup")
    for name, call in cases.items():
        times = {}
        for label, impl in impls.items():
            call(impl)  # compile / warm up
            times[label] = min(timeit.repeat(lambda: call(impl), number=args.repeat,
                                             repeat=3)) / args.repeat * 1e6
        speed = times["numpy"] / times["numba"] if "numba" in times else float("nan")
        print(f"{name:<20} " + " ".join(f"{t:12.2f}" for t in times.values()) + f"   {speed:6.1f}x")

    if args.skip_solves:
        return
    print()
    fast = end_to_end(False) if HAVE_NUMBA else None
    slow = end_to_end(True)
    for name, (t_slow, obj) in slow.items():
        if fast:
            t_fast, obj_fast = fast[name]
            same = "same objective" if abs(obj - obj_fast) <= 1e-9 else "OBJECTIVES DIFFER"
            print(f"{name:<24} numba {t_fast:7.3f} s  numpy {t_slow:7.3f} s  "
                  f"{t_slow / t_fast:5.2f}x  ({same})")
        else:
            print(f"{name:<24} numpy {t_slow:7.3f} s")


if __name__ == "__main__":
    main()
