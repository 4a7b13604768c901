#!/usr/bin/env python
"""Compare the numba kernel path against the pure-numpy fallback.

Times the secular-determinant grid sweep, the batched bisection refinement,
and the closed-form edge-integral batch on representative systems, then a
whole-pipeline sample solve.  Run both ways:

    python benchmarks/bench_kernels.py            # numba path (default)
    QGNLO_NUMBA=0 python benchmarks/bench_kernels.py   # numpy fallback
"""

import time

import numpy as np

from qgnlo import _kernels
from qgnlo.ensemble import GEOMETRY_BUILDERS, sample_rng, solve_record
from qgnlo.secular import assemble_system, solve_graph
from qgnlo.states import normalize


def timeit(fn, repeat):
    fn()  # warm up / JIT
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def main():
    print(f"kernel path: {_kernels.kernel_path()}")
    ks = np.linspace(0.1, 40.0, 2000)

    for cls in ("3-star", "star-star", "barbell-loop"):
        g = GEOMETRY_BUILDERS[cls](sample_rng(1, 0))
        enc = assemble_system(g).encoding
        dt = timeit(lambda: _kernels.det_grid(enc, ks), 200)
        vals = _kernels.det_grid(enc, ks)
        idx = np.nonzero((vals[:-1] < 0) != (vals[1:] < 0))[0]
        lo, hi, flo = ks[idx], ks[idx + 1], vals[idx]
        db = timeit(lambda: _kernels.bisect(enc, lo, hi, flo), 100)
        print(f"{cls:14s} det_grid(2000): {dt * 1e3:7.3f} ms   "
              f"bisect({len(lo)} roots): {db * 1e3:7.3f} ms")

    g = GEOMETRY_BUILDERS["lollipop"](sample_rng(1, 1))
    sol = normalize(solve_graph(g, 32))
    lengths = np.array([e.length for e in g.edges])
    p = np.ascontiguousarray(sol.coeffs[:, :, 0].T)
    q = np.ascontiguousarray(sol.coeffs[:, :, 1].T)
    di = timeit(lambda: _kernels.edge_integrals(sol.ks, p, q, lengths), 200)
    print(f"edge_integrals (32 states x {len(lengths)} edges): "
          f"{di * 1e3:7.3f} ms")

    t0 = time.perf_counter()
    for i in range(100):
        solve_record("3-star", 99, i)
    per = (time.perf_counter() - t0) / 100
    print(f"full 3-star sample solve: {per * 1e3:7.2f} ms "
          f"({60.0 / per:.0f} samples/min)")


if __name__ == "__main__":
    main()
