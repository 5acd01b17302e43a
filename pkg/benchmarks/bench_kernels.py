"""Compare the compiled and pure-Python inner-loop kernels.

    python3 benchmarks/bench_kernels.py [--n 10] [--m 50] [--p 5] [--steps 2000]

Both backends run the same steps from the same state; the script reports
steps per second, the speed-up, and whether the final iterates agree bitwise.
"""

import argparse
import time

import numpy as np

from gtsvrg import kernels
from gtsvrg import theory as th
from gtsvrg.algorithm import RunConfig, init
from gtsvrg.objectives import make_quadratic, make_reglog
from gtsvrg.topology import build_graph, metropolis_weights


def _time(backend, P, mix, alpha, steps, threads, repeats):
    kern = kernels.get_backend(backend)
    best, S = float("inf"), None
    for _ in range(repeats):
        S = init(P, mix, RunConfig(alpha=alpha, K=steps, T=1))
        start = time.perf_counter()
        kern.gtsvrg_steps(mix.W, S.x, S.y, S.v, S.snapshot_x, S.snapshot_grad,
                          P.family_code, P.A, P.vec, P.labels, P.lam, P.offsets,
                          alpha, 0, 0, 0, steps, threads)
        best = min(best, time.perf_counter() - start)
    return best, S


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--m", type=int, default=50)
    ap.add_argument("--p", type=int, default=5)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--family", choices=("quadratic", "reglog"), default="quadratic")
    args = ap.parse_args(argv)

    mix = metropolis_weights(build_graph("ring", args.n))
    if args.family == "quadratic":
        P = make_quadratic(args.n, args.m, args.p, 1.0, 10.0, seed=0)
    else:
        P = make_reglog(args.n, args.m, args.p, 0.1, seed=0)
    alpha = th.recommended_step(mix.sigma, P.Q, P.ell)

    backends = kernels.available_backends()
    print(f"{args.family} ring-{args.n}, m={args.m}, p={args.p}, {args.steps} steps, "
          f"threads={args.threads}, default backend: {kernels.default_backend_name()}")
    results = {}
    for name in backends:
        secs, S = _time(name, P, mix, alpha, args.steps, args.threads, args.repeats)
        results[name] = (secs, S)
        print(f"  {name:>8}: {secs:9.4f} s  {args.steps / secs:12.0f} steps/s")
    if len(results) == 2:
        (tc, Sc), (tp, Sp) = results["compiled"], results["python"]
        same = np.array_equal(Sc.x, Sp.x) and np.array_equal(Sc.y, Sp.y)
        # reglog goes through exp, which libm and numpy round differently
        rel = float(np.max(np.abs(Sc.x - Sp.x)) / max(1.0, float(np.max(np.abs(Sp.x)))))
        print(f"  speed-up compiled/python: {tp / tc:.1f}x; bitwise equal: {same}; "
              f"max relative difference in x: {rel:.3g}")
    else:
        print("  compiled kernel not built; only the pure-Python fallback was timed")


if __name__ == "__main__":
    main()
