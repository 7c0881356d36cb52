"""Times the path-recursion kernels on every importable backend.

Run from a checkout after installing the package:

    python3 benchmarks/bench_backends.py [--paths 20000] [--steps 512] [--repeat 5]

Besides wall time the script reports whether the backends produced
bit-identical output; they always should, the compiled kernel is built
with fp-contraction off for exactly that reason.
"""

import argparse
import time

import numpy as np

from cirbench import kernels


def _best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20000)
    ap.add_argument("--steps", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    v0, k, theta, xi, horizon = 0.02, 64.0, 0.02, 0.8, 1.0
    dt = horizon / args.steps
    rng = np.random.default_rng(123)
    dw = rng.standard_normal((args.paths, args.steps)) * np.sqrt(dt)

    total_steps = args.paths * args.steps
    print(f"fte kernels, paths={args.paths} steps={args.steps} (best of {args.repeat})")
    print(f"active backend: {kernels.backend_name()}")

    terminals = {}
    for name, mod in sorted(kernels.backends().items()):
        t_term, out = _best_time(lambda m=mod: m.fte_terminal(v0, k, theta, xi, dt, dw), args.repeat)
        t_traj, _ = _best_time(lambda m=mod: m.fte_trajectory(v0, k, theta, xi, dt, dw), args.repeat)
        terminals[name] = out
        print(
            f"  {name:<8} terminal {t_term * 1e3:9.2f} ms ({total_steps / t_term / 1e6:7.1f} Msteps/s)"
            f"   trajectory {t_traj * 1e3:9.2f} ms"
        )

    if len(terminals) > 1:
        values = list(terminals.values())
        identical = all(np.array_equal(values[0], v) for v in values[1:])
        print(f"terminal outputs bit-identical across backends: {identical}")


if __name__ == "__main__":
    main()
