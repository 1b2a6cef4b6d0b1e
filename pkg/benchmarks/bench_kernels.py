"""Compare the compiled and numpy integration kernels on the bundled examples.

Usage: python benchmarks/bench_kernels.py [--repeat 3] [--steps 5000]
"""

import argparse
import time

import numpy as np

from gpconsensus import kernels
from gpconsensus.graphs import pair_arrays
from gpconsensus.scenario import load_scenario


def kernel_args(name: str, steps: int):
    sc = load_scenario(name)
    gains = sc.synthesize()
    first, second = pair_arrays(sc.N)
    graph = sc.switching.graphs[0]
    hook = sc.hook
    return (
        sc.x0, np.ones(first.size), graph.edge_mask().astype(np.uint8), first, second,
        sc.plant.A, sc.plant.B @ gains.K_u, gains.K_u,
        hook.code, hook.source, hook.target, hook.scale,
        np.asarray(hook.grid, float), np.asarray(hook.values, float),
        np.full(steps, sc.integrator.step),
    )


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--steps", type=int, default=5000)
    args = ap.parse_args()

    print(f"backends available: {sorted(kernels.BACKENDS)}  (default {kernels.DEFAULT_BACKEND})")
    for name in ("example1", "example2"):
        a = kernel_args(name, args.steps)
        results = {}
        for backend, mod in kernels.BACKENDS.items():
            results[backend] = best_of(lambda: mod.integrate(*a), args.repeat), mod.integrate(*a)
        line = [f"{name}: {args.steps} RK4 steps"]
        for backend, (secs, _) in results.items():
            line.append(f"{backend} {secs * 1e3:8.1f} ms ({args.steps / secs:,.0f} steps/s)")
        if "cython" in results:
            line.append(f"speedup {results['python'][0] / results['cython'][0]:.1f}x")
            Xp, Xc = results["python"][1][0], results["cython"][1][0]
            line.append(f"max |dx| {np.abs(Xp - Xc).max():.2e}")
        print("  ".join(line))


if __name__ == "__main__":
    main()
