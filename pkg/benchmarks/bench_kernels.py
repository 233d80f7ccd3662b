"""Time the numba and numpy paths of the element kernels and of a full Newton solve.

    python benchmarks/bench_kernels.py [--degree K] [--n N] [--repeat R]
"""
import argparse
import time

import numpy as np

from hho_ns import _kernels
from hho_ns.bench import kovasznay
from hho_ns.local_ops import build_packs, convective_block, convective_first_slot
from hho_ns.mesh import generate_cartesian
from hho_ns.fespace import HHOSpace
from hho_ns.solver import SolverConfig, discretize, solve_navier_stokes


def _kernel_loop(packs, ws, repeat):
    t0 = time.perf_counter()
    for _ in range(repeat):
        for pk, w in zip(packs, ws):
            convective_block(pk, w)
            convective_first_slot(pk, w)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--degree", type=int, default=2)
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    ex = kovasznay()
    mesh = generate_cartesian(args.n, args.n, ex.domain)
    packs = build_packs(HHOSpace(mesh, args.degree))
    rng = np.random.default_rng(1)
    ws = [rng.standard_normal(pk.n_vel) for pk in packs]

    backends = [False] + ([True] if _kernels.HAVE_NUMBA else [])
    print(f"k={args.degree} mesh={args.n}x{args.n} elements={mesh.n_elements}")
    for use in backends:
        _kernels.set_backend(use)
        _kernel_loop(packs[:1], ws[:1], 1)  # compile / warm up
        tk = _kernel_loop(packs, ws, args.repeat)
        discretize.cache_clear()
        t0 = time.perf_counter()
        _, _, rep = solve_navier_stokes(mesh, args.degree, SolverConfig(), g=ex.u)
        ts = time.perf_counter() - t0
        name = "numba" if use else "numpy"
        print(f"{name:6s} kernels {tk / args.repeat * 1e3:8.1f} ms/sweep   newton solve {ts:6.2f} s ({rep.iterations} its)")


if __name__ == "__main__":
    main()
