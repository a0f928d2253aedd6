"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on identical inputs under both backends; the script also
checks that the outputs agree before reporting timings.
"""

import argparse
import time

import numpy as np

from robustfolio import _kernels
from robustfolio.solver import _reduce
from robustfolio.theorem import Caps, random_instance


def _lp_tableau(rng, m=40, n=80):
    A = rng.uniform(-1, 1, (m, n))
    b = rng.uniform(0.5, 1.5, m)
    c = rng.uniform(-1, 1, n)
    # max c.x s.t. A x <= b, x <= 1 becomes a feasible slack-basis tableau
    A = np.vstack([A, np.eye(n)])
    b = np.concatenate([b, np.ones(n)])
    rows = A.shape[0]
    T = np.zeros((rows + 1, n + rows + 1))
    T[:rows, :n] = A
    T[:rows, n:n + rows] = np.eye(rows)
    T[:rows, -1] = b
    T[rows, :n] = -c
    basis = np.arange(n, n + rows, dtype=np.intp)
    return T, basis, n + rows


def bench_simplex(mod, rng_seed, repeat):
    rng = np.random.default_rng(rng_seed)
    T0, b0, ncols = _lp_tableau(rng)
    best = np.inf
    for _ in range(repeat):
        T, basis = T0.copy(), b0.copy()
        t = time.perf_counter()
        status, it = mod.simplex_pivot(T, basis, ncols, 1e-11, 100000)
        best = min(best, time.perf_counter() - t)
    return best, (status, it, T[-1, -1])


def bench_supergradient(mod, rng_seed, repeat):
    inst = random_instance(np.random.default_rng(rng_seed), Caps(), plant=False)
    B = np.ascontiguousarray(_reduce(inst.market).B)
    P = np.ascontiguousarray(inst.priors.matrix)
    w0 = np.zeros(B.shape[1])
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = mod.eu_supergradient(B, P, inst.utility.code, float(inst.utility.param),
                                   inst.x, w0, 1.0, 10.0, 10000)
        best = min(best, time.perf_counter() - t)
    return best, out[1]


def bench_grid(mod, rng_seed, repeat):
    inst = random_instance(np.random.default_rng(rng_seed), Caps(leaves=4, assets=1, depth=2))
    while inst.market.node_gains.shape[1] != 3:
        rng_seed += 1
        inst = random_instance(np.random.default_rng(rng_seed), Caps(leaves=4, assets=1, depth=2))
    Gn = np.ascontiguousarray(inst.market.node_gains)
    Gl = np.ascontiguousarray(inst.market.terminal_gains)
    P = np.ascontiguousarray(inst.priors.matrix)
    lo, hi = -np.ones(3), np.ones(3)
    npts = np.full(3, 41, dtype=np.int64)
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = mod.grid_scan(Gn, Gl, P, inst.utility.code, float(inst.utility.param),
                            inst.x, lo, hi, npts)
        best = min(best, time.perf_counter() - t)
    return best, out[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    mods = _kernels.backends()
    if "cython" not in mods:
        print("compiled backend not built; only the fallback is available")
    rows = []
    for name, fn in (("simplex_pivot", bench_simplex),
                     ("eu_supergradient", bench_supergradient),
                     ("grid_scan (41^3)", bench_grid)):
        times, outs = {}, {}
        for backend, mod in mods.items():
            times[backend], outs[backend] = fn(mod, 11, args.repeat)
        if len(outs) == 2:
            a, b = outs["python"], outs["cython"]
            agree = np.allclose(np.ravel(a).astype(float), np.ravel(b).astype(float),
                                rtol=1e-9, atol=1e-12)
        else:
            agree = None
        rows.append((name, times, agree))

    print(f"{'kernel':<20}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}  outputs")
    for name, t, agree in rows:
        py = t.get("python", float("nan"))
        cy = t.get("cython", float("nan"))
        ratio = py / cy if cy == cy else float("nan")
        tag = "-" if agree is None else ("agree" if agree else "DIFFER")
        print(f"{name:<20}{py:>12.4g}{cy:>12.4g}{ratio:>10.1f}  {tag}")


if __name__ == "__main__":
    main()
