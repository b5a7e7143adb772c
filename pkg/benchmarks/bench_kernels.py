"""Time the compiled matched-filter kernel against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--rows 256] [--looks 4 8] [--grid 1000 10000]
"""
import argparse
import time

import numpy as np

from modrecon import kernels


def _case(rows, looks, seed=0):
    rng = np.random.default_rng(seed)
    ang = rng.uniform(0, 2 * np.pi, (rows, looks))
    return (np.ascontiguousarray(np.cos(ang)), np.ascontiguousarray(np.sin(ang)),
            rng.uniform(-2, 2, (rows, looks)), np.zeros(rows, dtype=np.int64))


def _best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=256)
    ap.add_argument("--looks", type=int, nargs="+", default=[4, 8])
    ap.add_argument("--grid", type=int, nargs="+", default=[1000, 10000])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    names = sorted(kernels.BACKENDS)
    if "compiled" not in names:
        print("compiled extension not built; only the python backend is available")
    print(f"{'looks':>5} {'grid':>7} " + " ".join(f"{n + ' [s]':>14}" for n in names)
          + ("   speedup  same_argmax" if len(names) > 1 else ""))
    for looks in args.looks:
        pre, pim, t, start = _case(args.rows, looks)
        for G in args.grid:
            times, results = {}, {}
            for name in names:
                fn = kernels.get(name)
                call = lambda: fn(pre, pim, t, 0.0, 1.0 / G, G, start, np.pi, False)
                results[name] = call()
                times[name] = _best_of(call, args.repeat)
            line = f"{looks:>5} {G:>7} " + " ".join(f"{times[n]:>14.4f}" for n in names)
            if len(names) > 1:
                same = np.mean(results["compiled"][0] == results["python"][0])
                line += f"   {times['python'] / times['compiled']:>7.1f}x  {same:>10.1%}"
            print(line)


if __name__ == "__main__":
    main()
