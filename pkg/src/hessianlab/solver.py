"""Finite-difference Dirichlet solver for sigma_k(D^2 u) = f, k in {1, 2}.

Second derivatives are taken along the stencil directions e_i and e_i +- e_j
with the three-point formula for unequal spacing, so nodes next to a
spherical boundary use the exact intersection point of the stencil line with
the sphere (boundary data evaluated there). Every such difference is exact on
quadratics. Mixed entries are H_ij = (D_{e_i+e_j} - D_{e_i-e_j}) / 4, which in
the bulk is the usual four-point cross difference.

For k = 2 the equation is rewritten as sigma_2(D^2u)**0.5 = f**0.5; the left
side is concave on Gamma_2, and each sweep replaces it by its tangent
operator at the projected current Hessian and solves the resulting linear
elliptic problem.
"""
from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Callable

import numpy as np
import pyamg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .algebra import TOL_ELL, cone_shift, project_to_cone, sigma_k, sqrt_sigma2_tangent  # noqa: F401
from .grid import Domain, GridFunction

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


def _as_field(spec):
    if callable(spec):
        return spec
    value = float(spec)
    return lambda x: np.full(np.asarray(x).shape[:-1], value)


@dataclass
class DirichletProblem:
    n: int
    k: int = 2
    domain: Domain = field(default_factory=Domain)
    rhs: object = 1.0
    boundary: Callable = None

    def __post_init__(self):
        if self.k not in (1, 2):
            raise ValueError(f"solver supports k in {{1, 2}}, got {self.k}")
        if not 2 <= self.n <= 3:
            raise ValueError(f"solver supports n in {{2, 3}}, got {self.n}")
        if self.boundary is None:
            raise ValueError("boundary data g is required")

    def f(self, x):
        return np.asarray(_as_field(self.rhs)(x), dtype=float)

    def g(self, x):
        return np.asarray(self.boundary(x), dtype=float)


@dataclass
class SolveOptions:
    damping: float = 0.5
    max_damping_steps: int = 6
    max_iterations: int = 200
    tol_update: float = 1e-9
    tol_residual: float = 0.0
    linear_tol: float = 1e-12
    direct_max_unknowns: int = 12000
    tol_ell: float = TOL_ELL


@dataclass
class SolveReport:
    iterations: int = 0
    residual: float = float("nan")
    cone_violations: int = 0
    wall_time: float = 0.0
    converged: bool = False
    residual_history: list = field(default_factory=list)
    update_history: list = field(default_factory=list)
    linear_solver: str = ""
    nonmonotone_steps: int = 0

    def to_dict(self, timing=False):
        d = {
            "iterations": self.iterations,
            "residual": self.residual,
            "cone_violations": self.cone_violations,
            "converged": self.converged,
            "residual_history": list(self.residual_history),
            "update_history": list(self.update_history),
            "linear_solver": self.linear_solver,
            "nonmonotone_steps": self.nonmonotone_steps,
        }
        if timing:
            d["wall_time"] = self.wall_time
        return d


def stencil_directions(n):
    dirs = []
    for i in range(n):
        v = np.zeros(n, dtype=int)
        v[i] = 1
        dirs.append(v)
    for i, j in combinations(range(n), 2):
        for s in (1, -1):
            v = np.zeros(n, dtype=int)
            v[i], v[j] = 1, s
            dirs.append(v)
    return dirs


class Stencil:
    """Directional three-point differences for every interior node of a grid."""

    def __init__(self, n, resolution, domain, g):
        self.grid = GridFunction(n, resolution, domain, np.zeros((resolution + 1,) * n))
        self.n = n
        self.h = self.grid.spacing
        inner = self.grid.interior
        self.inner_mask = inner
        self.nodes = np.argwhere(inner)  # (m, n) multi-indices in C order
        self.m = len(self.nodes)
        uid = -np.ones(self.grid.shape, dtype=np.int64)
        uid[inner] = np.arange(self.m)
        self.uid = uid
        self.x = self.grid.coords[inner]
        self.dirs = stencil_directions(n)
        self.legs = []  # per direction: ((theta, index, value) for +, then -)
        self.n_cut = 0
        R = domain.R
        for v in self.dirs:
            pair = []
            for s in (1, -1):
                nb = self.nodes + s * v
                nb_uid = uid[tuple(nb.T)]
                theta = np.ones(self.m)
                value = np.zeros(self.m)
                known = nb_uid < 0
                if np.any(known):
                    xk = self.x[known]
                    dv = s * self.h * v
                    nb_x = xk + dv
                    if domain.kind == "ball":
                        outside = np.linalg.norm(nb_x, axis=-1) > R * (1 + 1e-12)
                        th = np.ones(len(xk))
                        if np.any(outside):
                            # |x + t dv|^2 = R^2, positive root in (0, 1]
                            a = dv @ dv
                            b = 2 * xk[outside] @ dv
                            c = np.sum(xk[outside] ** 2, axis=-1) - R * R
                            t = (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)
                            th[outside] = np.clip(t, 1e-14, 1.0)
                            self.n_cut += int(outside.sum())
                        theta[known] = th
                        pts = xk + th[:, None] * dv
                        # snap to the sphere against rounding
                        r = np.linalg.norm(pts, axis=-1, keepdims=True)
                        pts = np.where(outside[:, None], pts * (R / r), pts)
                    else:
                        pts = nb_x
                    value[known] = g(pts)
                pair.append((theta, nb_uid, value))
            (tp, ip, vp), (tm, im, vm) = pair
            wp = 2.0 / (tp * (tp + tm) * self.h**2)
            wm = 2.0 / (tm * (tp + tm) * self.h**2)
            self.legs.append((wp, ip, vp, wm, im, vm))

    def directional(self, U):
        out = []
        for wp, ip, vp, wm, im, vm in self.legs:
            up = np.where(ip >= 0, U[np.maximum(ip, 0)], vp)
            um = np.where(im >= 0, U[np.maximum(im, 0)], vm)
            out.append(wp * up + wm * um - (wp + wm) * U)
        return out

    def hessians(self, U):
        d = self.directional(U)
        n = self.n
        H = np.zeros((self.m, n, n))
        for i in range(n):
            H[:, i, i] = d[i]
        k = n
        for i, j in combinations(range(n), 2):
            H[:, i, j] = H[:, j, i] = 0.25 * (d[k] - d[k + 1])
            k += 2
        return H

    def direction_coefficients(self, A):
        """Weights of each directional difference in trace(A H)."""
        n = self.n
        coef = [A[:, i, i] for i in range(n)]
        for i, j in combinations(range(n), 2):
            coef.append(0.5 * A[:, i, j])
            coef.append(-0.5 * A[:, i, j])
        return coef

    def assemble(self, A):
        """Sparse matrix L and boundary vector r with trace(A D_h^2 U) = L U + r."""
        rows, cols, vals = [], [], []
        r = np.zeros(self.m)
        diag = np.zeros(self.m)
        ar = np.arange(self.m)
        for kappa, (wp, ip, vp, wm, im, vm) in zip(self.direction_coefficients(A), self.legs):
            diag -= kappa * (wp + wm)
            for w, idx, val in ((wp, ip, vp), (wm, im, vm)):
                c = kappa * w
                unk = idx >= 0
                rows.append(ar[unk])
                cols.append(idx[unk])
                vals.append(c[unk])
                r[~unk] += c[~unk] * val[~unk]
        rows.append(ar)
        cols.append(ar)
        vals.append(diag)
        L = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.m, self.m),
        ).tocsr()
        return L, r

    def full_values(self, U, g):
        """Embed interior unknowns into a GridFunction, boundary from g."""
        grid = self.grid
        vals = np.empty(grid.shape)
        outer = ~self.inner_mask
        vals[outer] = g(grid.domain.project(grid.coords[outer]))
        vals[self.inner_mask] = U
        return grid.with_values(vals)


_AMG_LOCK = threading.Lock()


def _amg_preconditioner(A):
    # pyamg draws spectral-radius start vectors from the global numpy RNG; a
    # fixed seed (restored afterwards) makes the hierarchy reproducible
    with _AMG_LOCK:
        state = np.random.get_state()
        np.random.seed(0)
        try:
            ml = pyamg.smoothed_aggregation_solver(A, max_coarse=500)
        finally:
            np.random.set_state(state)
    return ml.aspreconditioner()


def _linear_solve(L, b, x0, options):
    m = L.shape[0]
    if m <= options.direct_max_unknowns:
        return spla.spsolve(L.tocsc(), b), "direct"
    d = L.diagonal()
    S = sp.diags(1.0 / d)
    Ls = (S @ L).tocsr()
    bs = b / d
    x, info = spla.gmres(
        Ls, bs, x0=x0, M=_amg_preconditioner(Ls), rtol=options.linear_tol * 0.1, atol=0.0,
        restart=60, maxiter=60,
    )
    if info != 0:
        log.warning("AMG-GMRES did not reach tolerance (info=%s); falling back to direct", info)
        return spla.spsolve(L.tocsc(), b), "direct"
    return x, "amg-gmres"


def _residual(stencil, U, f):
    s2 = sigma_k(stencil.hessians(U), 2)
    return float(np.max(np.abs(s2 - f))) if len(f) else 0.0


def _merit(stencil, U, f, tol_ell):
    # (sup, rms) of sigma_2 at the projected Hessians minus f
    H = stencil.hessians(U)
    shift = cone_shift(H, tol_ell)
    Hp = H + shift[:, None, None] * np.eye(stencil.n)
    if not len(f):
        return (0.0, 0.0), H, Hp, 0
    r = np.abs(sigma_k(Hp, 2) - f)
    return (float(r.max()), float(np.sqrt(np.mean(r * r)))), H, Hp, int(np.sum(shift > 0))


def solve_dirichlet(problem, resolution, options=None, initial=None):
    """Solve sigma_k(D^2 u) = f in the domain, u = g on its boundary.

    Returns the grid solution and a :class:`SolveReport`. For k = 2 the
    iteration starts from the solution of Laplace(u) = n (f / C(n,2))**0.5,
    which is exact whenever the solution has a constant multiple of the
    identity as Hessian.
    """
    options = options or SolveOptions()
    if resolution < 8:
        raise ValueError("resolution must be at least 8 intervals per axis")
    t0 = time.perf_counter()
    st = Stencil(problem.n, resolution, problem.domain, problem.g)
    f = problem.f(st.x)
    if problem.k == 2 and np.any(f <= 0):
        raise ValueError("right-hand side must be positive for k = 2")
    if problem.k == 1 and np.any(f < 0):
        raise ValueError("right-hand side must be nonnegative")
    report = SolveReport()
    n = problem.n
    eye = np.broadcast_to(np.eye(n), (st.m, n, n))

    def linear(A, rhs, x0):
        L, r = st.assemble(A)
        x, kind = _linear_solve(L, rhs - r, x0, options)
        report.linear_solver = kind
        return x

    if problem.k == 1:
        U = linear(eye, f, None)
        report.iterations = 1
        report.converged = True
        report.residual = float(np.max(np.abs(sigma_k(st.hessians(U), 1) - f))) if st.m else 0.0
        report.wall_time = time.perf_counter() - t0
        return st.full_values(U, problem.g), report

    if initial is not None:
        U = np.asarray(initial.values, dtype=float)[st.inner_mask]
    else:
        U = linear(eye, n * np.sqrt(f / comb(n, 2)), None)
    root_f = np.sqrt(f)
    merit, H, Hp, viol = _merit(st, U, f, options.tol_ell)
    report.residual_history.append(merit[0])
    for it in range(1, options.max_iterations + 1):
        if merit[0] <= options.tol_residual:
            report.converged = True
            break
        report.cone_violations += viol
        A, c = sqrt_sigma2_tangent(Hp)
        V = linear(A, root_f - c, U)
        step = V - U
        full = float(np.max(np.abs(step))) if st.m else 0.0
        # smallest damping power that does not raise the sup residual; if none
        # exists, the first step that does not raise the mean-square residual
        trials = []
        accepted = None
        t = 1.0
        for _ in range(options.max_damping_steps + 1):
            trial = U + t * step
            m_trial, H_t, Hp_t, viol_t = _merit(st, trial, f, options.tol_ell)
            trials.append((t, trial, m_trial, H_t, Hp_t, viol_t))
            if m_trial[0] <= merit[0]:
                accepted = trials[-1]
                break
            t *= options.damping
        if accepted is None:
            for cand in trials:
                if cand[2][1] <= merit[1]:
                    accepted = cand
                    report.nonmonotone_steps += 1
                    break
        report.iterations = it
        if accepted is None:
            if full < options.tol_update:
                report.converged = True
                break
            report.residual = _residual(st, U, f)
            report.wall_time = time.perf_counter() - t0
            raise ConvergenceError(
                f"no damped step decreased the residual at sweep {it} (update {full:.3e})", report
            )
        t, U, merit, H, Hp, viol = accepted
        report.residual_history.append(merit[0])
        report.update_history.append(t * full)
        log.debug("sweep %d: step %.3g update %.3e residual %.3e", it, t, t * full, merit[0])
        if t * full < options.tol_update:
            report.converged = True
            break
    report.residual = _residual(st, U, f)
    report.wall_time = time.perf_counter() - t0
    if not report.converged:
        raise ConvergenceError(
            f"no convergence within {options.max_iterations} sweeps", report
        )
    return st.full_values(U, problem.g), report
