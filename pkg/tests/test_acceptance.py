"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import time

import numpy as np
import pytest

from hessianlab.algebra import cone_membership, eigenvalues, elementary_symmetric, sigma_k
from hessianlab.barriers import barrier_sigma2_value, h_star, make_cylinder_barrier, make_wdelta, pogorelov_gallery
from hessianlab.certificate import Certificate, cylinder_boundary_samples
from hessianlab.experiments import (
    c2_at_origin_experiment,
    modulus_experiment,
    pogorelov_value,
    radial_datum,
    sharp_datum,
    smooth_family,
    solve_family,
    wall_barrier_for,
)
from hessianlab.grid import Domain, sample
from hessianlab.solver import DirichletProblem, solve_dirichlet
from hessianlab.support import strict_2convexity_audit

BALL = Domain("ball", 1.0)


@pytest.fixture
def verdict(capsys):
    def emit(number, name, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {number:2d}] {'PASS' if ok else 'FAIL'}  {name}: {detail}")
        assert ok, detail

    return emit


def test_01_sigma_k_oracle_equivalence(verdict):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0.0
    for n in range(1, 6):
        for k in range(1, n + 1):
            a = rng.normal(size=(1000, n, n))
            a = a + np.swapaxes(a, -1, -2)
            minors = sigma_k(a, k)
            spectral = elementary_symmetric(eigenvalues(a), k)
            rel = np.abs(minors - spectral) / np.maximum(np.abs(spectral), np.finfo(float).tiny)
            worst = max(worst, float(rel.max()))
    elapsed = time.perf_counter() - t0
    verdict(1, "sigma_k minors vs eigenvalues", worst <= 1e-9 and elapsed < 10,
            f"max relative gap {worst:.2e}, {elapsed:.2f} s")


def test_02_barrier_identity(verdict):
    rng = np.random.default_rng(2)
    worst, below = 0.0, True
    for n in range(2, 7):
        for _ in range(100):
            h, H = rng.uniform(0.01, 2.0), rng.uniform(0.1, 4.0)
            closed = 2 * (n - 1) * (n - 2) * h**2 + 16 * (n - 1) * h**2 / H**2
            oracle = float(sigma_k(make_cylinder_barrier(h, H, n).hessian(), 2))
            worst = max(worst, abs(oracle - closed) / closed, abs(barrier_sigma2_value(h, H, n) - closed) / closed)
            hs = h_star(n, H)
            h_small = hs * rng.uniform(0.0, 1.0)
            below &= barrier_sigma2_value(h_small, H, n) < 1 and barrier_sigma2_value(hs, H, n) <= 1
    verdict(2, "cylinder barrier sigma_2 identity", worst <= 1e-14 and below,
            f"max relative gap {worst:.2e}, below one for h <= h*: {below}")


def test_03_wdelta_two_convexity(verdict):
    rng = np.random.default_rng(3)
    worst, member = 0.0, True
    for n in range(3, 9):
        for delta in rng.uniform(1e-3, 10.0, 100):
            A = make_wdelta(delta, n).hessian()
            member &= cone_membership(A, 2, "closed").in_closure
            closed = 2 * delta**2 * (n - 2) * (n - 3)
            worst = max(worst, abs(float(sigma_k(A, 2)) - closed) / max(1.0, closed))
    verdict(3, "w_delta in the closed 2-cone", member and worst <= 1e-12,
            f"all members: {member}, max sigma_2 gap {worst:.2e}")


def test_04_radial_quadratic_exactness(verdict):
    t0 = time.perf_counter()
    worst_res, worst_err = 0.0, 0.0
    for n in (2, 3):
        datum = radial_datum(n)
        for N in (16, 32, 64):
            u, rep = solve_dirichlet(DirichletProblem(n, 2, BALL, 1.0, datum), N)
            worst_res = max(worst_res, rep.residual)
            worst_err = max(worst_err, float(np.abs(u.values - datum(u.coords))[u.mask].max()))
    elapsed = time.perf_counter() - t0
    verdict(4, "radial quadratic reproduced", worst_res <= 1e-9 and elapsed < 60,
            f"max residual {worst_res:.2e}, max nodal error {worst_err:.2e}, {elapsed:.1f} s")


def test_05_manufactured_convergence(verdict):
    U = lambda x: 0.5 * np.sum(x**2, -1) + np.sum(x**2, -1) ** 2 / 4
    f = lambda x: (1 + 3 * np.sum(x**2, -1)) * (1 + np.sum(x**2, -1))
    errs = []
    for N in (16, 32, 64):
        u, _ = solve_dirichlet(DirichletProblem(2, 2, BALL, f, U), N)
        errs.append(float(np.abs(u.values - U(u.coords))[u.mask].max()))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    verdict(5, "manufactured solution order", bool(np.all(orders >= 1.7)),
            f"errors {', '.join(f'{e:.2e}' for e in errs)}, orders {', '.join(f'{o:.2f}' for o in orders)}")


def recomputed_margins(u, cert):
    # independent of the search: denser boundary sampling, margins from scratch
    n = u.n
    interp = u.interpolator()

    def normalized(xi):
        x = cert.to_original(xi)
        vals = interp(x.reshape(-1, n)).reshape(x.shape[:-1])
        return (vals - cert.plane(x) - cert.slope * cert.rho * xi[..., -1]) / cert.rho**2

    P = make_cylinder_barrier(cert.h, cert.H, n).shifted(-cert.eta)
    bnd = cylinder_boundary_samples(n, cert.H, lateral=256, levels=65, rings=17)
    center = np.zeros(n)
    center[-1] = cert.H / 2
    return (
        float(np.min(P(bnd) - normalized(bnd))),
        float(normalized(center) - P(center)),
        1.0 - float(sigma_k(P.hessian(), 2)),
    )


def test_06_flat_set_audit_and_certificates(verdict):
    sharp = lambda x: x[..., 0] ** 2 + x[..., 1] ** 2
    details, ok = [], True
    for n, N in ((3, 32), (4, 12)):
        u = sample(sharp, n, N, Domain("box", 1.0))
        o = u.origin_node
        axis = [o[:-1] + (i,) for i in range(1, N) if i != o[-1]] + [o]
        rep = strict_2convexity_audit(u, axis)
        dims = {a.dimension for a in rep.nodes}
        ok &= rep.status == "PASS" and dims == {n - 2}
        details.append(f"sharp n={n}: {rep.status} dim {sorted(dims)}")
    for name, f in (("x3^2", lambda x: x[..., 2] ** 2), ("|x3|", lambda x: np.abs(x[..., 2]))):
        rep = strict_2convexity_audit(sample(f, 3, 32, Domain("box", 1.0)))
        cert = rep.certificates[0] if rep.certificates else None
        if isinstance(cert, Certificate):
            m = recomputed_margins(sample(f, 3, 32, Domain("box", 1.0)), cert)
            good = rep.status == "FAIL" and min(m) > 0
            details.append(f"{name}: margins {', '.join(f'{v:.3g}' for v in m)}")
        else:
            good = False
            details.append(f"{name}: no certificate")
        ok &= good
    verdict(6, "flat-set audit and certificates", ok, "; ".join(details))


def test_07_pogorelov_functional_stability(verdict):
    data = [radial_datum(3), smooth_family(1, 3, seed=7)[0]]
    details, ok = [], True
    for d in data:
        u32, _ = solve_dirichlet(DirichletProblem(3, 2, BALL, 1.0, d), 32)
        u64, _ = solve_dirichlet(DirichletProblem(3, 2, BALL, 1.0, d), 64)
        w, _ = wall_barrier_for(u32, mode="wide")
        v32, v64 = pogorelov_value(u32, w), pogorelov_value(u64, w)
        change = abs(v64 - v32) / abs(v64)
        ok &= change <= 0.10
        details.append(f"{d.label}: {v32:.4e} -> {v64:.4e} ({change:.1e})")
    verdict(7, "weighted Hessian functional 32 vs 64", ok, "; ".join(details))


def run_modulus():
    family = smooth_family(10, 3, seed=20240601)
    sols = solve_family(family, 3, 32, BALL)
    return modulus_experiment([(lab, u) for lab, u, _ in sols], K=2.0, r=0.1)


def test_08_modulus_positive_and_reproducible(verdict):
    a, b = run_modulus(), run_modulus()
    same = a.to_dict() == b.to_dict() and np.float64(a.delta).tobytes() == np.float64(b.delta).tobytes()
    verdict(8, "flat-set modulus delta(3, 2, 0.1)", a.delta > 0 and same and len(a.members) == 10,
            f"delta = {a.delta!r}, bit-identical rerun: {same}")


def test_09_hessian_at_origin(verdict):
    tab = c2_at_origin_experiment([radial_datum(3), sharp_datum()], [32, 64], n=3)
    radial = [v for _, v in tab.values("radial-x1")]
    err = max(abs(v - 1 / np.sqrt(3)) for v in radial)
    sharp = [v for _, v in tab.values("sharp-x1")]
    change = tab.refinement_change("sharp-x1")
    ok = err <= 1e-6 and np.all(np.isfinite(sharp)) and change <= 0.01
    verdict(9, "Hessian norm at the origin", ok,
            f"radial error {err:.1e}; sharp trace {sharp[0]:.6f} -> {sharp[1]:.6f} (change {change:.1e})")


def test_10_gallery_sharpness(verdict):
    u = pogorelov_gallery(3, 4)
    norms = [float(np.linalg.norm(u.hessian(np.array([r, 0.0, 0.0, 0.1])), 2)) for r in (1e-1, 1e-2, 1e-3)]
    growth = norms[-1] / norms[0]
    rho = np.geomspace(1e-3, 1e-1, 9)
    theta = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    t = np.linspace(-0.25, 0.25, 9)
    R, TH, T = np.meshgrid(rho, theta, t, indexing="ij")
    pts = np.stack([R * np.cos(TH), R * np.sin(TH), np.full(R.shape, 0.2), T], axis=-1).reshape(-1, 4)
    s3 = sigma_k(u.hessian(pts), 3)
    lo, hi = float(s3.min()), float(s3.max())
    ok = growth >= 10 and lo > 0.5 and hi < 1.5
    verdict(10, "k = 3 gallery sharpness", ok,
            f"Hessian growth {growth:.1f}x over 1e-1 -> 1e-3, sigma_3 in [{lo:.3f}, {hi:.3f}]")
