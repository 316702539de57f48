import numpy as np
import pytest

from hessianlab.grid import Domain
from hessianlab.pipeline import SphereMollifier, approximation_pipeline
from hessianlab.solver import DirichletProblem, solve_dirichlet


@pytest.mark.parametrize("n", [2, 3])
def test_mollifier_reproduces_constants_and_is_smoothing(n):
    m = SphereMollifier(lambda x: np.full(x.shape[:-1], 2.5), 0.5, 0.25, n)
    pts = np.random.default_rng(1).normal(size=(30, n))
    pts = 0.5 * pts / np.linalg.norm(pts, axis=1, keepdims=True)
    assert np.allclose(m(pts), 2.5, atol=1e-14)
    kink = SphereMollifier(lambda x: np.abs(x[..., 0]), 0.5, 0.25, n)
    assert kink(np.eye(n)[1] * 0.5) > 0


def test_mollification_error_shrinks_with_width():
    g = lambda x: np.abs(x[..., 0])
    pts = np.random.default_rng(3).normal(size=(200, 3))
    pts = 0.5 * pts / np.linalg.norm(pts, axis=1, keepdims=True)
    errs = [np.abs(SphereMollifier(g, 0.5, 2.0**-j, 3)(pts) - g(pts)).max() for j in (1, 2, 3, 4)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_quadratic_trace_is_reproduced_at_every_level():
    alpha = 1 / np.sqrt(3)
    q = lambda x: 0.5 * alpha * np.sum(x**2, -1)
    res = approximation_pipeline(q, 3, 3, 12)
    for v in res.approximants:
        assert np.abs(v.values - q(v.coords))[v.mask].max() <= 1e-10
    assert max(res.boundary_errors) <= 1e-12


def test_cauchy_differences_decrease_2d():
    g = lambda x: np.maximum(np.abs(x[..., 0]) - 0.1, 0) ** 2 + x[..., 1] ** 2
    res = approximation_pipeline(g, 4, 2, 32)
    d = res.cauchy_differences()
    assert len(d) == 3
    assert all(a > b for a, b in zip(d, d[1:]))


def test_sharp_trace_error_bounded_by_boundary_error():
    g = lambda x: x[..., 0] ** 2 + x[..., 1] ** 2
    N = 16
    exact, _ = solve_dirichlet(DirichletProblem(3, 2, Domain("ball", 0.5), 1.0, g), N)
    res = approximation_pipeline(g, 3, 3, N)
    for v, berr in zip(res.approximants, res.boundary_errors):
        err = np.abs(v.values - exact.values)[v.interior].max()
        assert err <= 2 * berr
    errs = [np.abs(v.values - exact.values)[v.interior].max() for v in res.approximants]
    assert errs[-1] < errs[0]
