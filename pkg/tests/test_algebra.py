import itertools
from math import comb, sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hessianlab.algebra import (
    TOL_ELL,
    ConeExitError,
    SymmetricMatrix,
    cone_membership,
    eigenvalues,
    elementary_symmetric,
    project_to_cone,
    sigma_k,
    sigma_k_gradient,
    support_linearization,
)


def random_sym(rng, n, scale=1.0):
    a = rng.normal(scale=scale, size=(n, n))
    return 0.5 * (a + a.T)


def e_k_bruteforce(lam, k):
    return sum(np.prod(c) for c in itertools.combinations(lam, k))


def random_gamma2(rng, n):
    # I plus a bounded perturbation stays in Gamma_2 often enough; reject the rest
    while True:
        m = np.eye(n) * rng.uniform(0.2, 3.0) + random_sym(rng, n, 0.5)
        if cone_membership(m, 2).in_open_cone and sigma_k(m, 2) > 1e-3:
            return m


# -- sigma_k ---------------------------------------------------------------

def test_sigma_k_identity():
    assert sigma_k(SymmetricMatrix.identity(3), 2) == 3.0


def test_sigma_k_sharp_example():
    assert sigma_k(SymmetricMatrix.diag([2, 2, 0]), 2) == 4.0


def test_sigma_k_random_n4_k3_against_char_poly():
    rng = np.random.default_rng(7)
    m = random_sym(rng, 4)
    lam = np.linalg.eigvalsh(m)
    # coefficient of t^3 in prod(1 + t*lam) read off numpy's polynomial product
    poly = np.array([1.0])
    for v in lam:
        poly = np.polymul(poly, [v, 1.0])
    from_poly = poly[::-1][3]
    minors = sum(
        np.linalg.det(m[np.ix_(c, c)]) for c in itertools.combinations(range(4), 3)
    )
    assert sigma_k(m, 3) == pytest.approx(from_poly, rel=1e-10)
    assert sigma_k(m, 3) == pytest.approx(minors, rel=1e-12)


@pytest.mark.parametrize("k", [0, 4])
def test_sigma_k_order_out_of_range(k):
    with pytest.raises(ValueError):
        sigma_k(SymmetricMatrix.identity(3), k)


def test_sigma_k_vectorized_matches_scalar():
    rng = np.random.default_rng(1)
    stack = np.array([random_sym(rng, 3) for _ in range(5)])
    out = sigma_k(stack, 2)
    assert out.shape == (5,)
    for i in range(5):
        assert out[i] == pytest.approx(sigma_k(stack[i], 2), abs=1e-14)


def test_elementary_symmetric_matches_bruteforce():
    rng = np.random.default_rng(2)
    lam = rng.normal(size=6)
    for k in range(7):
        assert elementary_symmetric(lam, k) == pytest.approx(e_k_bruteforce(lam, k), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 8), seed=st.integers(0, 2**32 - 1), scale=st.floats(0.1, 10.0))
def test_minor_path_matches_eigenvalue_path(n, seed, scale):
    m = random_sym(np.random.default_rng(seed), n, scale)
    lam = np.linalg.eigvalsh(m)
    for k in range(1, n + 1):
        via_minors = sigma_k(m, k)
        via_eigs = elementary_symmetric(lam, k)
        denom = max(abs(via_eigs), np.prod(np.sort(np.abs(lam))[::-1][:k]) * comb(n, k))
        assert abs(via_minors - via_eigs) <= 1e-9 * denom


# -- spectrum ----------------------------------------------------------------

def test_eigenvalues_identity():
    assert eigenvalues(SymmetricMatrix.identity(2)).eigenvalues == (1.0, 1.0)


def test_eigenvalues_cylinder_barrier_hessian():
    h, H = 0.1, 1.0
    spec = eigenvalues(SymmetricMatrix.diag([8 * h / H**2, 2 * h, 2 * h]))
    assert spec.eigenvalues == pytest.approx((0.8, 0.2, 0.2), abs=1e-15)


def test_spectrum_sorted_trace_and_ek():
    rng = np.random.default_rng(3)
    m = random_sym(rng, 5)
    lam = eigenvalues(SymmetricMatrix.from_dense(m)).eigenvalues
    assert list(lam) == sorted(lam, reverse=True)
    assert sum(lam) == pytest.approx(np.trace(m), rel=1e-10, abs=1e-12)
    for k in range(1, 6):
        assert e_k_bruteforce(lam, k) == pytest.approx(sigma_k(m, k), rel=1e-9, abs=1e-12)
    w, q = np.linalg.eigh(m)
    assert np.allclose(q @ np.diag(w) @ q.T, m, rtol=1e-10, atol=1e-12)


# -- gradient ----------------------------------------------------------------

def test_gradient_identity():
    g = sigma_k_gradient(SymmetricMatrix.identity(3), 2)
    assert np.array_equal(g.dense(), 2 * np.eye(3))


def test_gradient_sharp_example():
    g = sigma_k_gradient(SymmetricMatrix.diag([2, 2, 0]), 2)
    assert np.array_equal(g.dense(), np.diag([2.0, 2.0, 4.0]))


def fd_gradient(m, k, step=1e-5):
    n = m.shape[0]
    g = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            e = np.zeros((n, n))
            e[i, j] = e[j, i] = 1.0
            d = (sigma_k(m + step * e, k) - sigma_k(m - step * e, k)) / (2 * step)
            g[i, j] = g[j, i] = d if i == j else d / 2
    return g


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_gradient_matches_finite_differences(n):
    rng = np.random.default_rng(10 + n)
    for k in range(1, n + 1):
        for _ in range(100):
            m = random_sym(rng, n)
            g = sigma_k_gradient(m, k)
            fd = fd_gradient(m, k)
            scale = max(np.abs(fd).max(), 1.0)
            assert np.abs(g - fd).max() <= 1e-6 * scale


def test_gradient_diagonal_is_complementary_sigma():
    lam = np.array([3.0, -1.0, 0.5, 2.0])
    g = sigma_k_gradient(np.diag(lam), 3)
    for i in range(4):
        rest = np.delete(lam, i)
        assert g[i, i] == pytest.approx(e_k_bruteforce(rest, 2), abs=1e-13)


# -- cones -------------------------------------------------------------------

def test_cone_identity_full_order():
    assert cone_membership(SymmetricMatrix.identity(4), 4).in_open_cone


def test_cone_sharp_example():
    m = SymmetricMatrix.diag([2, 2, 0])
    assert cone_membership(m, 2).in_open_cone
    assert not cone_membership(m, 3).in_open_cone


def test_cone_wdelta_boundary_case():
    m = SymmetricMatrix.diag([4, 4, -2])
    rep = cone_membership(m, 2, "closed")
    assert rep.sigmas[1] == 0.0
    assert rep.in_closure and rep.member
    assert not rep.in_open_cone
    minors = sum(np.linalg.det(m.dense()[np.ix_(c, c)]) for c in itertools.combinations(range(3), 2))
    assert minors == pytest.approx(0.0, abs=1e-14)


@settings(max_examples=80, deadline=None)
@given(n=st.integers(2, 6), seed=st.integers(0, 2**32 - 1))
def test_newton_cone_nesting(n, seed):
    m = random_sym(np.random.default_rng(seed), n) + np.eye(n) * 0.8
    for k in range(1, n + 1):
        if cone_membership(m, k).in_open_cone:
            assert all(cone_membership(m, l).in_open_cone for l in range(1, k))
        rep = cone_membership(m, k)
        assert rep.in_open_cone == all(s > 0 for s in rep.sigmas)
        assert (not rep.in_open_cone) or rep.in_closure


@pytest.mark.parametrize("eps", [1e-3, 1e-6])
def test_closure_perturbation(eps):
    closed = [
        np.diag([2.0, 2.0, 0.0]),
        np.diag([4.0, 4.0, -2.0]),
        np.zeros((3, 3)),
        np.diag([1.0, 0.0, 0.0, 0.0]),
    ]
    for m in closed:
        k = 2
        assert cone_membership(m, k, "closed").in_closure
        assert cone_membership(m + eps * np.eye(m.shape[0]), k).in_open_cone


# -- linearization ------------------------------------------------------------

def test_linearization_identity():
    op = support_linearization(SymmetricMatrix.identity(3))
    assert np.allclose(op.coefficient_matrix.dense(), np.eye(3) / sqrt(3), atol=1e-15)
    assert op.offset == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("alpha", [0.1, 1.0, 7.5])
def test_linearization_tangent_at_base(alpha):
    m = alpha * np.eye(3)
    op = support_linearization(m)
    assert op(m) == pytest.approx(sqrt(sigma_k(m, 2)), rel=1e-14)


def test_linearization_majorizes():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        m, nmat = random_gamma2(rng, 3), random_gamma2(rng, 3)
        op = support_linearization(m)
        assert op(nmat) >= sqrt(sigma_k(nmat, 2)) - 1e-12


def test_linearization_psd_coefficients():
    rng = np.random.default_rng(5)
    for _ in range(200):
        op = support_linearization(random_gamma2(rng, 4))
        assert np.linalg.eigvalsh(op.coefficient_matrix.dense()).min() >= -1e-14


@pytest.mark.parametrize(
    "m", [np.diag([1.0, -1.0]), np.zeros((3, 3)), -np.eye(3), np.eye(3) * 1e-6]
)
def test_linearization_cone_exit(m):
    with pytest.raises(ConeExitError) as info:
        support_linearization(m)
    assert info.value.report.k == 2


# -- projection ---------------------------------------------------------------

def bisect_shift(m, tol_ell=TOL_ELL):
    n = m.shape[0]

    def ok(t):
        s = m + t * np.eye(n)
        return sigma_k(s, 1) > 0 and sigma_k(s, 2) >= tol_ell

    lo, hi = 0.0, 1.0
    while not ok(hi):
        hi *= 2
    if ok(lo):
        return 0.0
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


def test_projection_leaves_cone_points():
    m = np.diag([1.0, 1.0])
    assert sigma_k(m, 2) == 1.0
    assert np.array_equal(project_to_cone(m), m)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_projection_of_zero(n):
    out = project_to_cone(np.zeros((n, n)))
    tau = out[0, 0]
    assert tau == pytest.approx(sqrt(TOL_ELL / comb(n, 2)), rel=1e-8)
    assert cone_membership(out, 2).in_open_cone


def test_projection_indefinite_2d():
    out = project_to_cone(np.diag([1.0, -1.0]))
    tau = out[0, 0] - 1.0
    assert tau == pytest.approx(bisect_shift(np.diag([1.0, -1.0])), abs=1e-12)
    assert (1 + tau) * (tau - 1) == pytest.approx(TOL_ELL, rel=1e-6)


def test_projection_matches_bisection_random():
    rng = np.random.default_rng(6)
    for _ in range(200):
        n = int(rng.integers(2, 5))
        m = random_sym(rng, n, 2.0)
        out = project_to_cone(m)
        tau = out[0, 0] - m[0, 0]
        assert tau == pytest.approx(bisect_shift(m), abs=1e-10)
        assert sigma_k(out, 2) >= TOL_ELL and sigma_k(out, 1) > 0


def test_symmetric_matrix_storage():
    m = SymmetricMatrix.from_dense([[1.0, 2.0], [99.0, 3.0]])
    assert m.packed == (1.0, 2.0, 3.0)
    assert np.array_equal(m.dense(), [[1.0, 2.0], [2.0, 3.0]])
    with pytest.raises(ValueError):
        SymmetricMatrix(2, (1.0, float("nan"), 0.0))
    with pytest.raises(ValueError):
        SymmetricMatrix.identity(9)
