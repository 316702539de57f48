"""Smooth approximants: mollify a boundary trace on the sphere, then solve."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Domain, GridFunction
from .solver import DirichletProblem, SolveOptions, solve_dirichlet


def _bump(theta, width):
    s = np.clip(theta / width, -1.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        out = np.exp(-1.0 / (1.0 - s * s))
    return np.where(np.abs(s) < 1.0, out, 0.0)


def _tangent_frame(xhat):
    # two unit tangent vectors at each point of the 2-sphere
    ref = np.where(np.abs(xhat[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    t1 = np.cross(xhat, ref)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(xhat, t1)
    return t1, t2


class SphereMollifier:
    """Average of g over a geodesic cap of angular radius ``width``, weighted by a smooth bump.

    Quadrature: Gauss-Legendre in the polar angle, uniform in the azimuth.
    Constants are reproduced exactly.
    """

    def __init__(self, g, radius, width, n, polar_nodes=8, azimuth_nodes=16):
        if n not in (2, 3):
            raise ValueError("sphere mollification implemented for n in {2, 3}")
        self.g, self.radius, self.width, self.n = g, radius, width, n
        gl_x, gl_w = np.polynomial.legendre.leggauss(polar_nodes)
        if n == 2:
            self.theta = width * gl_x
            self.weights = width * gl_w * _bump(self.theta, width)
        else:
            theta = 0.5 * width * (gl_x + 1.0)
            w = 0.5 * width * gl_w * np.sin(theta) * _bump(theta, width)
            psi = 2 * np.pi * np.arange(azimuth_nodes) / azimuth_nodes
            T, P = np.meshgrid(theta, psi, indexing="ij")
            self.theta, self.psi = T.ravel(), P.ravel()
            self.weights = np.repeat(w, azimuth_nodes) / azimuth_nodes
        self.weights = self.weights / self.weights.sum()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        pts = x.reshape(-1, self.n)
        r = np.linalg.norm(pts, axis=1, keepdims=True)
        xhat = np.where(r > 0, pts / np.where(r > 0, r, 1.0), np.eye(self.n)[0])
        if self.n == 2:
            phi = np.arctan2(xhat[:, 1], xhat[:, 0])[:, None] + self.theta[None, :]
            ys = self.radius * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        else:
            t1, t2 = _tangent_frame(xhat)
            ct, stt = np.cos(self.theta), np.sin(self.theta)
            cp, sp_ = np.cos(self.psi), np.sin(self.psi)
            ys = self.radius * (
                ct[None, :, None] * xhat[:, None, :]
                + (stt * cp)[None, :, None] * t1[:, None, :]
                + (stt * sp_)[None, :, None] * t2[:, None, :]
            )
        vals = np.asarray(self.g(ys.reshape(-1, self.n)), dtype=float).reshape(len(pts), -1)
        return (vals @ self.weights).reshape(shape)


@dataclass
class PipelineResult:
    approximants: list
    reports: list
    boundary_errors: list = field(default_factory=list)

    def cauchy_differences(self):
        out = []
        for a, b in zip(self.approximants, self.approximants[1:]):
            out.append(float(np.abs(a.values - b.values)[a.mask].max()))
        return out


def _trace_function(target):
    if isinstance(target, GridFunction):
        interp = target.interpolator()
        return lambda x: interp(np.asarray(x, dtype=float).reshape(-1, target.n)).reshape(
            np.asarray(x).shape[:-1]
        )
    return target


def approximation_pipeline(target, levels, n, resolution, radius=0.5, rhs=1.0, options=None):
    """Solve sigma_2 = rhs in B_radius with the trace of ``target`` mollified at scale 2**-j.

    ``target`` is a function of points or a GridFunction covering the sphere.
    Returns a :class:`PipelineResult` with one solution per level j = 1..levels.
    """
    g = _trace_function(target)
    domain = Domain("ball", radius)
    approximants, reports, berr = [], [], []
    probe = np.random.default_rng(0).normal(size=(400, n))
    probe = radius * probe / np.linalg.norm(probe, axis=1, keepdims=True)
    for j in range(1, levels + 1):
        gj = SphereMollifier(g, radius, 2.0**-j, n)
        problem = DirichletProblem(n, 2, domain, rhs, gj)
        u, rep = solve_dirichlet(problem, resolution, options or SolveOptions())
        approximants.append(u)
        reports.append(rep)
        berr.append(float(np.abs(gj(probe) - g(probe)).max()))
    return PipelineResult(approximants, reports, berr)
