"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 3]

Each case runs the same integration on both backends, checks that the
trajectories are bitwise identical and prints the wall-clock speedup.
"""

import argparse
import time

import numpy as np

from ratelab import RandomStream, TimeGrid, integrate_ode, integrate_sde
from ratelab._backend import compiled_available
from ratelab.climate import AlbedoParams, EBMConstants, ebm_field, equilibria
from ratelab.hopf import HopfParams, ShiftDrift, hopf_field
from ratelab.saddle_node import SaddleNodeParams, sn_field
from ratelab.slowfast import SlowFastParams, Steady, sf_field


def cases():
    consts, ap = EBMConstants(), AlbedoParams()
    Tp = equilibria(consts, ap, 1.0)[1]
    yield ("saddle_node RK4 40k steps",
           lambda b: integrate_ode(sn_field(SaddleNodeParams(0.25, 0.2)), [0.0, 0.0],
                                   TimeGrid(0.0, 200.0, 0.005), backend=b))
    yield ("hopf_shift RK4 200k steps",
           lambda b: integrate_ode(hopf_field(HopfParams(5.0, ShiftDrift(0.25, 8.0))),
                                   [0.4, 0.5, 1e-4], TimeGrid(0.0, 200.0, 0.001), backend=b))
    yield ("slowfast RK4 200k steps",
           lambda b: integrate_ode(sf_field(SlowFastParams(0.01, 3, Steady(0.8))),
                                   [0.0, 0.0, 0.0], TimeGrid(0.0, 100.0, 0.0005), backend=b))
    yield ("ebm Euler-Maruyama 20k steps",
           lambda b: integrate_sde(ebm_field(consts, ap, 1.0, nu=1.0), [Tp],
                                   TimeGrid(0.0, 2000.0, 0.1), 0.2, RandomStream(7), backend=b))


def timed(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not compiled_available():
        raise SystemExit("compiled kernels are not built; run `pip install -e .` first")
    print(f"{'case':32s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s}  identical")
    for name, fn in cases():
        tp, a = timed(lambda: fn("python"), args.repeat)
        tc, b = timed(lambda: fn("compiled"), args.repeat)
        same = np.array_equal(a.times, b.times) and np.array_equal(a.states, b.states)
        print(f"{name:32s} {tp:11.4f} {tc:13.5f} {tp / tc:7.0f}x  {same}")


if __name__ == "__main__":
    main()
