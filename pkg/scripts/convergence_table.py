"""Observed convergence order of the solver on the manufactured 2D solution
U = |x|^2/2 + |x|^4/4, on the unit ball and the unit box.

Usage: python3 scripts/convergence_table.py [N1 N2 ...]
"""
import sys

import numpy as np

from hessianlab.grid import Domain
from hessianlab.solver import DirichletProblem, solve_dirichlet


def U(x):
    r2 = np.sum(x**2, -1)
    return 0.5 * r2 + r2**2 / 4


def f(x):
    # radial eigenvalues of D^2 U are 1 + 3 r^2 and 1 + r^2
    r2 = np.sum(x**2, -1)
    return (1 + 3 * r2) * (1 + r2)


def table(resolutions, kind):
    rows, prev = [], None
    for N in resolutions:
        u, rep = solve_dirichlet(DirichletProblem(2, 2, Domain(kind, 1.0), f, U), N)
        err = float(np.abs(u.values - U(u.coords))[u.mask].max())
        order = np.log2(prev / err) if prev else float("nan")
        rows.append((N, err, order, rep.iterations, rep.residual))
        prev = err
    return rows


if __name__ == "__main__":
    res = [int(v) for v in sys.argv[1:]] or [16, 32, 64, 128]
    for kind in ("ball", "box"):
        print(f"{kind}:  N   sup error   order  sweeps  residual")
        for N, err, order, it, resid in table(res, kind):
            print(f"     {N:4d}  {err:.3e}  {order:5.2f}  {it:6d}  {resid:.1e}")
