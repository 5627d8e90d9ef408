"""Time the compiled and pure-Python lower envelopes against O(N^2) brute force.

Usage: python3 benchmarks/bench_envelope.py [--sizes 512,1024,4096] [--lines 1] [--repeat 3]
"""
import argparse
import time

import numpy as np

from concentrate import kernels
from concentrate.cost import CostPair
from concentrate.hopf_lax import Axis, envelope_bruteforce, kernel_table


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="512,1024,4096")
    ap.add_argument("--lines", type=int, default=1)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--beta", type=float, default=0.5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    cost = CostPair(args.beta, 1.0 if args.beta == 0 else None)
    backends = [("python", kernels.python_lower_envelope)]
    if kernels.compiled_lower_envelope is not None:
        backends.insert(0, ("compiled", kernels.compiled_lower_envelope))
    print(f"{'N':>6} {'backend':>10} {'seconds':>10} {'vs brute':>9} exact")
    for n in (int(s) for s in args.sizes.split(",")):
        f = rng.normal(size=(args.lines, n))
        c = kernel_table(Axis(-5, 5, n), 1.0, cost)
        t_brute, ref = best_time(lambda: envelope_bruteforce(f, c), args.repeat)
        print(f"{n:>6} {'brute':>10} {t_brute:>10.2e} {1.0:>9.1f}")
        for name, env in backends:
            t, out = best_time(lambda: env(f, c), args.repeat)
            exact = np.array_equal(out[0], ref[0]) and np.array_equal(out[1], ref[1])
            print(f"{n:>6} {name:>10} {t:>10.2e} {t_brute / t:>9.1f} {exact}")


if __name__ == "__main__":
    main()
