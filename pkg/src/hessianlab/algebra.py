"""Elementary symmetric functions of Hessians and the Garding cones.

Every public function accepts either a :class:`SymmetricMatrix` or a dense
array of shape ``(..., n, n)``; array inputs are evaluated over the leading
axes, which is how the grid solver calls them.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, isfinite, sqrt

import numpy as np

TOL_CONE = 1e-12
TOL_ELL = 1e-10
MAX_DIM = 8


class ConeExitError(ValueError):
    """Raised when a matrix leaves the cone on which an operation is defined."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SymmetricMatrix:
    """Dense symmetric matrix stored as its packed upper triangle (row major)."""

    n: int
    packed: tuple

    def __post_init__(self):
        if not 1 <= self.n <= MAX_DIM:
            raise ValueError(f"dimension {self.n} outside 1..{MAX_DIM}")
        if len(self.packed) != self.n * (self.n + 1) // 2:
            raise ValueError("packed length does not match dimension")
        if not all(isfinite(v) for v in self.packed):
            raise ValueError("matrix entries must be finite")

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        iu = np.triu_indices(a.shape[0])
        return cls(a.shape[0], tuple(float(v) for v in a[iu]))

    @classmethod
    def diag(cls, values):
        return cls.from_dense(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def identity(cls, n):
        return cls.from_dense(np.eye(n))

    def dense(self):
        a = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n)
        a[iu] = self.packed
        a.T[iu] = self.packed
        return a

    def __add__(self, other):
        if not isinstance(other, SymmetricMatrix) or other.n != self.n:
            return NotImplemented
        return SymmetricMatrix(self.n, tuple(a + b for a, b in zip(self.packed, other.packed)))

    def scaled(self, factor):
        return SymmetricMatrix(self.n, tuple(factor * v for v in self.packed))

    def trace(self):
        return float(np.trace(self.dense()))


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: tuple  # descending


@dataclass(frozen=True)
class ConeReport:
    k: int
    sigmas: tuple
    in_open_cone: bool
    in_closure: bool
    mode: str = "open"

    @property
    def member(self):
        return self.in_open_cone if self.mode == "open" else self.in_closure


@dataclass(frozen=True)
class LinearOperator:
    """Affine map ``N -> trace(A N) + c`` on symmetric matrices."""

    coefficient_matrix: SymmetricMatrix
    offset: float

    def __call__(self, m):
        a = self.coefficient_matrix.dense()
        return float(np.einsum("ij,ij->", a, _dense(m))) + self.offset


def _dense(m):
    if isinstance(m, SymmetricMatrix):
        return m.dense()
    a = np.asarray(m, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected (..., n, n) array, got shape {a.shape}")
    return a


def _check_order(k, n):
    if not (isinstance(k, (int, np.integer)) and 1 <= k <= n):
        raise ValueError(f"order k={k} outside 1..{n}")


def _wrap(m, result):
    # Keep the caller's type: SymmetricMatrix in, SymmetricMatrix out.
    if isinstance(m, SymmetricMatrix):
        return SymmetricMatrix.from_dense(result)
    return result


def sigma_k(m, k):
    """Sum of all k x k principal minors of ``m``.

    Orders 1 and 2 use the explicit minor expansions; higher orders take a
    determinant per index subset.
    """
    a = _dense(m)
    n = a.shape[-1]
    _check_order(k, n)
    if k == 1:
        out = np.trace(a, axis1=-2, axis2=-1)
    elif k == 2:
        out = np.zeros(a.shape[:-2])
        for i, j in itertools.combinations(range(n), 2):
            out = out + a[..., i, i] * a[..., j, j] - a[..., i, j] * a[..., j, i]
    else:
        out = np.zeros(a.shape[:-2])
        for idx in itertools.combinations(range(n), k):
            sub = a[..., idx, :][..., :, idx]
            out = out + np.linalg.det(sub)
    if isinstance(m, SymmetricMatrix):
        return float(out)
    return out


def elementary_symmetric(values, k):
    """e_k of the entries along the last axis, from the coefficients of prod(1 + t*x)."""
    x = np.asarray(values, dtype=float)
    coeffs = [np.ones(x.shape[:-1])] + [np.zeros(x.shape[:-1]) for _ in range(x.shape[-1])]
    for j in range(x.shape[-1]):
        lam = x[..., j]
        for m in range(j + 1, 0, -1):
            coeffs[m] = coeffs[m] + lam * coeffs[m - 1]
    return coeffs[k]


def eigenvalues(m):
    a = _dense(m)
    lam = np.linalg.eigvalsh(a)[..., ::-1]
    if isinstance(m, SymmetricMatrix):
        return Spectrum(tuple(float(v) for v in lam))
    return lam


def sigma_k_gradient(m, k):
    """Derivative of sigma_k with respect to the matrix entries.

    This is the Newton tensor T_{k-1}(M), built from T_0 = I and
    T_j = sigma_j(M) I - M T_{j-1}; d/dt sigma_k(M + tE) = trace(T_{k-1} E).
    """
    a = _dense(m)
    n = a.shape[-1]
    _check_order(k, n)
    eye = np.broadcast_to(np.eye(n), a.shape)
    t = np.array(eye)
    for j in range(1, k):
        s = sigma_k(a, j)
        t = np.asarray(s)[..., None, None] * eye - a @ t
    t = 0.5 * (t + np.swapaxes(t, -1, -2))
    return _wrap(m, t)


def cone_membership(m, k, mode="open", tol=TOL_CONE):
    if mode not in ("open", "closed"):
        raise ValueError(f"mode must be 'open' or 'closed', got {mode!r}")
    a = _dense(m)
    if a.ndim != 2:
        raise ValueError("cone_membership takes a single matrix; use cone_mask for stacks")
    _check_order(k, a.shape[-1])
    sig = tuple(float(sigma_k(a, l)) for l in range(1, k + 1))
    return ConeReport(
        k=k,
        sigmas=sig,
        in_open_cone=all(s > 0 for s in sig),
        in_closure=all(s >= -tol for s in sig),
        mode=mode,
    )


def cone_mask(a, k, mode="open", tol=TOL_CONE):
    """Vectorized membership test over a stack of matrices."""
    a = _dense(a)
    ok = np.ones(a.shape[:-2], dtype=bool)
    for l in range(1, k + 1):
        s = sigma_k(a, l)
        ok &= (s > 0) if mode == "open" else (s >= -tol)
    return ok


def sqrt_sigma2_tangent(a):
    """Gradient and offset of F = sigma_2**0.5 for a stack of matrices in Gamma_2.

    No cone checks; callers guarantee sigma_2 > 0 and sigma_1 > 0.
    """
    s2 = sigma_k(a, 2)
    f = np.sqrt(s2)
    grad = sigma_k_gradient(a, 2) / (2.0 * f)[..., None, None]
    offset = f - np.einsum("...ij,...ij->...", grad, a)
    return grad, offset


def support_linearization(m, tol_ell=TOL_ELL):
    """Tangent affine map to sigma_2(N)**0.5 at ``m``.

    By concavity on Gamma_2 the returned operator majorizes sigma_2**0.5
    there. Raises :class:`ConeExitError` outside the open cone or when
    sigma_2 is at or below ``tol_ell``.
    """
    a = _dense(m)
    if a.ndim != 2:
        raise ValueError("support_linearization takes a single matrix")
    if a.shape[0] < 2:
        raise ValueError("sigma_2 needs n >= 2")
    report = cone_membership(a, 2, "open")
    if not report.in_open_cone or report.sigmas[1] <= tol_ell:
        raise ConeExitError(
            f"matrix outside Gamma_2 (sigmas={report.sigmas}, tol_ell={tol_ell})", report
        )
    grad, offset = sqrt_sigma2_tangent(a)
    return LinearOperator(SymmetricMatrix.from_dense(grad), float(offset))


def project_to_cone(m, tol_ell=TOL_ELL):
    """Shift ``m`` by the smallest multiple of I that lands in Gamma_2 with sigma_2 >= tol_ell.

    sigma_2(M + tI) = C t^2 + (n-1) sigma_1 t + sigma_2 with C = n(n-1)/2, and
    the Gamma_2 branch lies right of the vertex t = -sigma_1/n, so the
    shift is the larger root of that quadratic (clamped at 0).
    """
    a = _dense(m)
    n = a.shape[-1]
    shift = cone_shift(a, tol_ell)
    out = a + shift[..., None, None] * np.eye(n)
    return _wrap(m, out)


def cone_shift(a, tol_ell=TOL_ELL):
    a = _dense(a)
    n = a.shape[-1]
    c2 = comb(n, 2)
    s1 = np.asarray(sigma_k(a, 1), dtype=float)
    s2 = np.asarray(sigma_k(a, 2), dtype=float)
    # aim a hair above tol_ell so roundoff cannot land the result below it
    b = (n - 1) * s1
    c = s2 - tol_ell * (1.0 + 1e-9)
    sq = np.sqrt(np.maximum(b * b - 4.0 * c2 * c, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        # cancellation-free larger root
        root = np.where(b > 0, -2.0 * c / (b + sq), (sq - b) / (2.0 * c2))
    root = np.nan_to_num(root, nan=0.0)
    inside = (s1 > 0) & (s2 >= tol_ell)
    shift = np.where(inside, 0.0, np.maximum(root, 0.0))
    for _ in range(8):
        shifted = a + shift[..., None, None] * np.eye(n)
        bad = ~inside & ((sigma_k(shifted, 2) < tol_ell) | (sigma_k(shifted, 1) <= 0))
        if not np.any(bad):
            break
        shift = np.where(bad, shift * (1.0 + 1e-12) + 1e-300, shift)
    return shift


def binomial(n, k):
    return comb(n, k)


def sqrt_c2(n):
    """Radial coefficient alpha with sigma_2(alpha I) = 1, i.e. (2/(n(n-1)))**0.5."""
    return sqrt(2.0 / (n * (n - 1)))
