"""Compiled vs pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times the RK4 shooting solve and the 1D DG pseudo-time iteration with each
available implementation and checks that both return the same numbers.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from crowdflow import kernels
from crowdflow.dg import Operators, PenaltyConfig, _bandwidth, to_banded
from crowdflow.mesh import build_interval_mesh
from crowdflow.model import ModelParams
from crowdflow.velocity import resolve_velocity


def _best(fun, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fun()
        best = min(best, time.perf_counter() - t0)
    return best, out


def dg_problem(n_cells=200, eps=0.01, alpha=0.3, beta=0.6, tau=0.01):
    params = ModelParams.one_dimensional(eps, alpha, beta, tau=tau)
    mesh = build_interval_mesh(n_cells)
    vel = resolve_velocity(mesh, params.velocity, params.segments)
    ops = Operators.build(params, mesh, vel, PenaltyConfig())
    static = (ops.mass + tau * (ops.swip + ops.robin)).tocsr()
    assert max(_bandwidth(static)) <= 3
    ab = np.ascontiguousarray(to_banded(static, 3, 3))
    f = np.ascontiguousarray(ops.load)
    u = np.ascontiguousarray(vel.cells[:, 0])
    rho0 = np.full(mesh.n_dofs, params.initial_density)
    return ab, f, u, np.ascontiguousarray(mesh.cell_measures), rho0, tau


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--dg-iters", type=int, default=2000)
    args = ap.parse_args(argv)

    impls = kernels.implementations()
    ab, f, u, h, rho0, tau = dg_problem()
    rows = []
    results = {}
    for name, mod in impls.items():
        t_shoot, shoot = _best(
            lambda: mod.shoot_bisect(0.05, 0.3, 0.6, 1e-8, 0.3, 10_000, -1, 60), args.repeat)
        t_dg, dg = _best(
            lambda: mod.dg1d_iterate(ab, f, u, h, rho0, tau, 0.0, args.dg_iters), args.repeat)
        results[name] = (shoot, dg)
        rows.append((name, t_shoot, t_dg / dg[1] * 1e6))

    print(f"{'kernel':10s} {'shoot_bisect [s]':>18s} {'dg1d step [us]':>16s}")
    for name, ts, td in rows:
        print(f"{name:10s} {ts:18.4f} {td:16.2f}")
    if "compiled" in results:
        py, cc = results["python"], results["compiled"]
        print(f"speedup: shooting {rows[0][1] / rows[1][1]:.1f}x, dg step {rows[0][2] / rows[1][2]:.1f}x")
        print(f"max |j_py - j_c| = {abs(py[0][0] - cc[0][0]):.2e}, "
              f"max |rho_py - rho_c| = {np.max(np.abs(py[1][0] - cc[1][0])):.2e}")
    else:
        print("compiled extension not built; only the python kernel was timed")


if __name__ == "__main__":
    main()
