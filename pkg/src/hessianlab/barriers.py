"""Explicit comparison functions: cylinder paraboloids, the 2-convex saddles
w_delta and the wall barrier, and Pogorelov-type singular candidates for k >= 3.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .algebra import SymmetricMatrix


@dataclass(frozen=True)
class QuadraticForm:
    """x -> x.Ax/2 + b.x + c with a constant Hessian A."""

    A: SymmetricMatrix
    b: tuple
    c: float

    def __post_init__(self):
        if len(self.b) != self.A.n:
            raise ValueError("gradient length does not match dimension")

    @property
    def n(self):
        return self.A.n

    @classmethod
    def from_arrays(cls, A, b=None, c=0.0):
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
        return cls(SymmetricMatrix.from_dense(A), tuple(float(v) for v in b), float(c))

    @classmethod
    def linear(cls, slope, c=0.0):
        slope = np.asarray(slope, dtype=float)
        return cls.from_arrays(np.zeros((slope.size, slope.size)), slope, c)

    def __call__(self, x):
        # longdouble inputs stay in longdouble (used by finite-difference checks)
        x = np.asarray(x)
        if x.dtype != np.longdouble:
            x = x.astype(float)
        A = self.A.dense().astype(x.dtype)
        b = np.asarray(self.b, dtype=x.dtype)
        quad = 0.5 * np.einsum("...i,ij,...j->...", x, A, x)
        return quad + x @ b + x.dtype.type(self.c)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.A.dense() + np.asarray(self.b)

    def hessian(self, x=None):
        return self.A

    def shifted(self, dc):
        return QuadraticForm(self.A, self.b, self.c + float(dc))

    def scaled(self, factor):
        return QuadraticForm(
            self.A.scaled(factor), tuple(factor * v for v in self.b), factor * self.c
        )

    def plus(self, other):
        return QuadraticForm(
            self.A + other.A,
            tuple(p + q for p, q in zip(self.b, other.b)),
            self.c + other.c,
        )

    def compose_affine(self, Q, x0):
        """The form x -> q(Q (x - x0))."""
        Q = np.asarray(Q, dtype=float)
        x0 = np.asarray(x0, dtype=float)
        A = self.A.dense()
        b = np.asarray(self.b)
        A2 = Q.T @ A @ Q
        b2 = Q.T @ b - A2 @ x0
        c2 = 0.5 * x0 @ A2 @ x0 - b @ (Q @ x0) + self.c
        return QuadraticForm.from_arrays(0.5 * (A2 + A2.T), b2, c2)

    def to_triple(self):
        return {"A": self.A.dense().tolist(), "b": list(self.b), "c": self.c}

    @classmethod
    def from_triple(cls, d):
        return cls.from_arrays(d["A"], d["b"], d["c"])


@dataclass(frozen=True)
class Cylinder:
    """{|x'| < radius} x (0, H) with x' the coordinates other than ``axis``."""

    H: float
    n: int
    radius: float = 1.0
    axis: int = -1

    def __post_init__(self):
        if not self.H > 0:
            raise ValueError("cylinder height must be positive")

    def contains(self, x, closed=False):
        x = np.asarray(x, dtype=float)
        ax = self.axis % self.n
        t = x[..., ax]
        rho = np.linalg.norm(np.delete(x, ax, axis=-1), axis=-1)
        if closed:
            return (rho <= self.radius) & (t >= 0) & (t <= self.H)
        return (rho < self.radius) & (t > 0) & (t < self.H)


def _check_positive(**kw):
    for name, v in kw.items():
        if not (np.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be positive, got {v}")


def make_cylinder_barrier(h, H, n):
    """The paraboloid h|x'|^2 + 4 h/H^2 (x_n - H/2)^2 over the cylinder of height H."""
    _check_positive(h=h, H=H)
    if n < 2:
        raise ValueError("need n >= 2")
    diag = np.full(n, 2.0 * h)
    diag[-1] = 8.0 * h / H**2
    b = np.zeros(n)
    b[-1] = -4.0 * h / H
    return QuadraticForm.from_arrays(np.diag(diag), b, h)


def cylinder_constants(n):
    """(c1, c2) with sigma_2 of the cylinder paraboloid = c1 h^2 + c2 h^2/H^2."""
    return 2.0 * (n - 1) * (n - 2), 16.0 * (n - 1)


def barrier_sigma2_value(h, H, n):
    _check_positive(h=h, H=H)
    if n < 2:
        raise ValueError("need n >= 2")
    c1, c2 = cylinder_constants(n)
    return c1 * h**2 + c2 * h**2 / H**2


def h_star(n, H):
    """Height of paraboloid small enough that sigma_2 < 1 (sufficient, not sharp)."""
    _check_positive(H=H)
    return min(1.0, H) / (8.0 * n)


def _saddle_diag(delta, n):
    _check_positive(delta=delta)
    if n < 3:
        raise ValueError("w_delta needs n >= 3: the z-block would be empty")
    d = np.full(n, -2.0 * delta)
    d[:2] = 4.0 * delta * (n - 2)
    return d


def make_wdelta(delta, n):
    """delta [2(n-2)(x1^2 + x2^2) - (x3^2 + ... + xn^2)]."""
    return QuadraticForm.from_arrays(np.diag(_saddle_diag(delta, n)))


def make_wall_barrier(delta, n):
    """delta (2(n-2)|y|^2 - |z|^2 + 1/8) with y the first two coordinates."""
    return QuadraticForm.from_arrays(np.diag(_saddle_diag(delta, n)), None, delta / 8.0)


class AnalyticFunction:
    """Closed-form function with exact gradient and Hessian, vectorized over points."""

    tag = "analytic"

    def __call__(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    def params(self):
        return {}


def _default_profile():
    return (lambda t: 1.0 + t * t, lambda t: 2.0 * t, lambda t: 2.0 + 0.0 * t)


@dataclass
class PogorelovCandidate(AnalyticFunction):
    """u(x) = |x'|^(2 - 2/k) g(x_n) with x' = (x_1, ..., x_{k-1}).

    The coordinates x_k, ..., x_{n-1} do not enter, so u vanishes on the
    (n-k+1)-dimensional subspace {x' = 0}. sigma_k(D^2u) does not depend on
    |x'| and equals p^(k-1) g^(k-2) ((p-1) g g'' - p g'^2) with p = 2 - 2/k.
    """

    k: int
    n: int
    profile: tuple = field(default_factory=_default_profile)
    tag = "pogorelov"

    def __post_init__(self):
        if self.k < 3:
            raise ValueError("Pogorelov-type candidates need k >= 3; for k = 2 none exist")
        if self.n < self.k + 1:
            raise ValueError(f"need n >= k + 1, got n={self.n}, k={self.k}")

    @property
    def exponent(self):
        return 2.0 - 2.0 / self.k

    @property
    def flat_dimension(self):
        return self.n - self.k + 1

    def params(self):
        return {"k": self.k, "n": self.n, "exponent": self.exponent}

    def _parts(self, x):
        x = np.asarray(x)
        xp = x[..., : self.k - 1]
        t = x[..., -1]
        rho = np.sqrt(np.sum(xp * xp, axis=-1))
        return xp, t, rho

    def __call__(self, x):
        xp, t, rho = self._parts(x)
        g = self.profile[0]
        return rho**self.exponent * g(t)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        xp, t, rho = self._parts(x)
        p = self.exponent
        g, dg, _ = self.profile
        out = np.zeros_like(x)
        out[..., : self.k - 1] = (p * rho ** (p - 2) * g(t))[..., None] * xp
        out[..., -1] = rho**p * dg(t)
        return out

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        xp, t, rho = self._parts(x)
        p = self.exponent
        g, dg, d2g = self.profile
        m = self.k - 1
        H = np.zeros(x.shape + (self.n,))
        gt = g(t)
        block = (p * rho ** (p - 2) * gt)[..., None, None] * np.eye(m) + (
            p * (p - 2) * rho ** (p - 4) * gt
        )[..., None, None] * (xp[..., :, None] * xp[..., None, :])
        H[..., :m, :m] = block
        mixed = (p * rho ** (p - 2) * dg(t))[..., None] * xp
        H[..., :m, -1] = mixed
        H[..., -1, :m] = mixed
        H[..., -1, -1] = rho**p * d2g(t)
        return H

    def sigma_k_closed_form(self, t):
        p, k = self.exponent, self.k
        g, dg, d2g = self.profile
        gt = g(t)
        return p ** (k - 1) * gt ** (k - 2) * ((p - 1) * gt * d2g(t) - p * dg(t) ** 2)

    def convexity_window(self):
        """Half-width in x_n of the slab where D^2u >= 0, for the default profile only."""
        p = self.exponent
        return float(np.sqrt((p - 1) / (p + 1)))


def pogorelov_gallery(k, n, profile=None):
    if profile is None:
        return PogorelovCandidate(k, n)
    return PogorelovCandidate(k, n, tuple(profile))
