"""Time the compiled and pure-Python kernels on the same inputs.

    python benchmarks/bench_kernels.py [--sizes 20 60 120] [--repeat 3]

Both backends must return identical arrays; the script exits nonzero otherwise.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from fiberlab.kernels import available_backends


def _instance(rng, n, m, d=2):
    a = rng.uniform(0.2, 1.0, n)
    b = rng.uniform(0.2, 1.0, m)
    a /= a.sum()
    b /= b.sum()
    x = rng.normal(size=(n, d))
    y = rng.normal(size=(m, d))
    C = ((x[:, None] - y[None]) ** 2).sum(-1)
    return a, b, C


def _gain(rng, n):
    x = rng.normal(size=(n, 2))
    y = x + 0.1 * rng.normal(size=(n, 2))
    return ((x - y) ** 2).sum(1)[None, :] - ((x[:, None] - y[None]) ** 2).sum(-1)


def _best(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[20, 60, 120])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    backends = available_backends()
    if "cython" not in backends:
        print("compiled backend not built; only the fallback is available")
    rng = np.random.default_rng(args.seed)
    mismatch = False
    print(f"{'kernel':<18}{'size':>6}" + "".join(f"{name:>12}" for name in backends) + f"{'speedup':>10}")
    for n in args.sizes:
        a, b, C = _instance(rng, n, n + n // 2)
        G = _gain(rng, n)
        for label, call in (
            ("transport_simplex", lambda mod: mod.transport_simplex(a, b, C, 1e-14, 100000)),
            ("longest_paths", lambda mod: mod.longest_paths(G, np.zeros(n), 1e-12, n + 1)),
        ):
            timings, outputs = {}, {}
            for name, mod in backends.items():
                timings[name], outputs[name] = _best(lambda: call(mod), args.repeat)
            ref = outputs["python"]
            for name, out in outputs.items():
                if not all(np.array_equal(np.asarray(u), np.asarray(v)) for u, v in zip(out, ref)):
                    print(f"mismatch: {label} size {n} backend {name}")
                    mismatch = True
            speed = timings["python"] / timings["cython"] if "cython" in timings else float("nan")
            cells = "".join(f"{timings[name] * 1e3:>10.2f}ms" for name in backends)
            print(f"{label:<18}{n:>6}{cells}{speed:>9.1f}x")
    return 1 if mismatch else 0


if __name__ == "__main__":
    sys.exit(main())
