"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--n 200000] [--repeat 5]

Each kernel is run once to warm the JIT, then timed ``repeat`` times; the
best time is reported. Outputs are compared for bit-identity on the way.
"""

import argparse
import time

import numpy as np

from martensim import kernels
from martensim.blocks import make_library
from martensim.fragment import SimConfig, run


def best_of(fn, repeat):
    fn()
    ts = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t)
    return min(ts)


def inputs(n, seed=0):
    g = np.random.default_rng(seed)
    x0 = g.random(n) * 0.5
    y0 = g.random(n) * 0.5
    l1 = 10 ** g.uniform(-3, 0, n) * 0.5
    l2 = l1 * 10 ** g.uniform(-1.5, 1.5, n)
    px = x0 + g.random(n) * l1
    py = y0 + g.random(n) * l2
    d = g.integers(1, 3, n)
    return x0, y0, x0 + l1, y0 + l2, px, py, d


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if "numba" not in kernels.BACKENDS:
        print("numba is not installed; only the numpy backend exists")
        return
    n = args.n
    rows = []

    x0, y0, x1, y1, px, py, d = inputs(n)
    for rule, name in ((0, "place/Original"), (1, "place/Change1"), (2, "place/Amod")):
        t = {}
        out = {}
        for b in ("numpy", "numba"):
            f = kernels.BACKENDS[b]["place"]
            call = lambda f=f: f(x0, y0, x1, y1, px, py, d, 0.4, rule, False, False, 0.0)
            t[b] = best_of(call, args.repeat)
            out[b] = call()
        same = all(np.array_equal(a, c) for a, c in zip(out["numpy"], out["numba"]))
        rows.append((name, t["numpy"], t["numba"], same))

    c = np.arange(n, dtype=np.uint64)
    z = np.zeros(n, dtype=np.uint64)
    t = {}
    out = {}
    for b in ("numpy", "numba"):
        f = kernels.BACKENDS[b]["philox"]
        call = lambda f=f: f(c, z + 3, z, z, 12345, 0)
        t[b] = best_of(call, args.repeat)
        out[b] = call()
    rows.append(("philox", t["numpy"], t["numba"], np.array_equal(out["numpy"], out["numba"])))

    cfg = SimConfig(delta=0.4, max_steps=1)
    lib = make_library(cfg.boundary(), cfg.wells(), 0.4, 3)
    ms = lib.block(1)
    g = np.random.default_rng(1)
    qx = g.random(n)
    qy = g.random(n) * 0.4
    ix = ms.index
    t = {}
    out = {}
    for b in ("numpy", "numba"):
        with kernels.use_backend(b):
            t[b] = best_of(lambda: ix.locate(qx, qy), args.repeat)
            out[b] = ix.locate(qx, qy)
    rows.append(("locate (block, %d regions)" % len(ms), t["numpy"], t["numba"],
                 np.array_equal(out["numpy"], out["numba"])))

    sim = SimConfig(algorithm="A", delta=0.05, min_length=1e-2, degenerate_rule="Change1",
                    record_events=False, seed=1)
    t = {}
    out = {}
    for b in ("numpy", "numba"):
        with kernels.use_backend(b):
            t[b] = best_of(lambda: run(sim), max(1, args.repeat // 2))
            out[b] = run(sim).series_csv()
    rows.append(("run Model A delta=0.05", t["numpy"], t["numba"], out["numpy"] == out["numba"]))

    print(f"{'kernel':<32}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}  identical")
    for name, tn, tb, same in rows:
        print(f"{name:<32}{tn:12.4f}{tb:12.4f}{tn / tb:10.1f}  {same}")


if __name__ == "__main__":
    main()
