"""Contradiction certificates for flat sets of codimension one, and
touch tests of the viscosity inequality with quadratic test functions.

A certificate normalizes u - L near a base point so that the flat set is
{y_n = 0}, subtracts the largest slope a y_n that keeps the remainder
nonnegative on one side, rescales by a lateral radius rho and then fits the
paraboloid P_h of a cylinder Q_h = {|xi'| < 1, 0 < xi_n < H} above the
normalized function on the boundary of Q_h and below it at the center.
Since sigma_2(D^2 P_h) < 1, a vertical translate of the paraboloid touches u
from above at an interior point, which is incompatible with sigma_2 >= 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .algebra import cone_membership, sigma_k
from .barriers import QuadraticForm, make_cylinder_barrier
from .grid import GridFunction

MAX_HALVINGS = 12


def cylinder_boundary_samples(n, H, lateral=64, levels=17, rings=5):
    """Points on the boundary of {|xi'| < 1, 0 < xi_n < H}."""
    dirs = _sphere_directions(n - 1, lateral)
    t = np.linspace(0.0, H, levels)
    side = np.concatenate([np.column_stack([dirs, np.full(len(dirs), s)]) for s in t])
    radii = np.linspace(0.0, 1.0, rings)
    disk = np.concatenate([rho * dirs for rho in radii])
    caps = [np.column_stack([disk, np.full(len(disk), s)]) for s in (0.0, H)]
    return np.concatenate([side] + caps)


def _sphere_directions(m, count):
    # deterministic unit vectors in R^m
    if m == 1:
        return np.array([[1.0], [-1.0]])
    if m == 2:
        a = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(a), np.sin(a)])
    out = []
    eye = np.eye(m)
    for i in range(m):
        out += [eye[i], -eye[i]]
    for i, j in combinations(range(m), 2):
        for a in (1, -1):
            for b in (1, -1):
                out.append((a * eye[i] + b * eye[j]) / np.sqrt(2))
    return np.array(out)


def _complete_frame(normal, flat_basis):
    """Orthonormal rows: flat directions first, ``normal`` last."""
    n = normal.size
    rows = []
    for v in list(flat_basis) + list(np.eye(n)):
        v = np.asarray(v, dtype=float)
        v = v - (v @ normal) * normal
        for r in rows:
            v = v - (v @ r) * r
        if np.linalg.norm(v) > 1e-8 and len(rows) < n - 1:
            rows.append(v / np.linalg.norm(v))
    return np.vstack(rows + [normal])


def _lateral_radius(u, x0):
    # the closed cylinder of height <= rho sits inside the ball of radius rho*sqrt(2)
    R = u.domain.R
    if u.domain.kind == "box":
        dist = R - np.max(np.abs(x0))
    else:
        dist = R - np.linalg.norm(x0)
    return dist / np.sqrt(2.0)


@dataclass(frozen=True)
class Certificate:
    """Verified witness that u violates sigma_2 >= 1 near ``base_point``.

    Normal coordinates are xi = rotation (x - base_point) / rho, whose last
    axis is the side of the flat set that was used. The normalized function
    is (u - L - slope * xi_n * rho) / rho**2.
    """

    base_point: tuple
    rotation: tuple
    slope: float
    rho: float
    h: float
    H: float
    eta: float
    barrier: QuadraticForm
    margins: dict
    plane: object = field(repr=False)

    def __post_init__(self):
        if not all(v > 0 for v in self.margins.values()):
            raise ValueError(f"certificate margins must be positive: {self.margins}")

    @property
    def n(self):
        return len(self.base_point)

    @property
    def normal(self):
        return np.asarray(self.rotation[-1])

    def to_normal(self, x):
        x = np.asarray(x, dtype=float)
        return (x - np.asarray(self.base_point)) @ np.asarray(self.rotation).T / self.rho

    def to_original(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.asarray(self.base_point) + self.rho * xi @ np.asarray(self.rotation)

    def comparison_function(self):
        """rho^2 P(xi(x)) + L(x) + slope * y_n(x) as a form on the original coordinates."""
        Q = np.asarray(self.rotation) / self.rho
        shape = self.barrier.compose_affine(Q, self.base_point).scaled(self.rho**2)
        tilt = QuadraticForm.linear(
            self.slope * self.normal, -self.slope * self.normal @ np.asarray(self.base_point)
        )
        return shape.plus(self.plane.as_form()).plus(tilt)

    def cylinder_mask(self, u):
        xi = self.to_normal(u.coords)
        lateral = np.linalg.norm(xi[..., :-1], axis=-1)
        return u.mask & (lateral <= 1.0) & (xi[..., -1] >= 0) & (xi[..., -1] <= self.H)

    def touching_function(self, u):
        """Translate of the comparison function touching u from above on the cylinder.

        Returns the form and the node where it touches.
        """
        phi = self.comparison_function()
        region = self.cylinder_mask(u)
        diff = np.where(region, u.values - phi(u.coords), -np.inf)
        node = tuple(int(i) for i in np.unravel_index(np.argmax(diff), diff.shape))
        return phi.shifted(float(diff[node])), node

    def to_dict(self):
        return {
            "base_point": list(self.base_point),
            "rotation": [list(r) for r in self.rotation],
            "normal": list(map(float, self.normal)),
            "slope": self.slope,
            "rho": self.rho,
            "h": self.h,
            "H": self.H,
            "eta": self.eta,
            "barrier": self.barrier.to_triple(),
            "sigma2_barrier": float(sigma_k(self.barrier.hessian(), 2)),
            "margins": dict(self.margins),
            "plane": self.plane.to_dict(),
        }


@dataclass
class NoCertificate:
    reason: str
    landscape: list = field(default_factory=list)

    def to_dict(self):
        return {"certificate": None, "reason": self.reason, "landscape": self.landscape}


def _one_sided_slope(v_along, spacing, limit):
    # least squares v(t) ~ a t + b t^2 on t = dx, 2dx, 3dx, clamped to [0, limit]
    t = spacing * np.arange(1, 4)
    A = np.column_stack([t, t * t])
    a = np.linalg.lstsq(A, v_along(t), rcond=None)[0][0]
    return float(np.clip(a, 0.0, limit))


def cylinder_certificate(u, plane, frame, H0=1.0, max_halvings=MAX_HALVINGS):
    """Search for a cylinder-paraboloid certificate at the plane's base point.

    ``frame`` is an AffineFitReport of the flat set; it must have dimension at
    least n - 1, and its last principal axis is used as the normal. Both sides
    of the flat set are tried, with heights H = H0 * 2**-m, m = 0..max_halvings.
    """
    n = u.n
    if frame.dimension < n - 1:
        return NoCertificate(
            f"flat set has estimated dimension {frame.dimension} < n - 1 = {n - 1}; "
            "no codimension-one flat set to certify"
        )
    x0 = np.asarray(plane.base_point)
    basis = np.asarray(frame.basis)
    normal0 = basis[-1] / np.linalg.norm(basis[-1])
    rho = _lateral_radius(u, x0)
    if rho <= 2 * u.spacing:
        return NoCertificate(f"base point too close to the boundary (rho = {rho:.3g})")
    interp = u.interpolator()
    osc = u.oscillation() or 1.0

    def v(x):
        x = np.asarray(x, dtype=float)
        return interp(x.reshape(-1, n)).reshape(x.shape[:-1]) - plane(x)

    coords = u.coords[u.mask]
    vals = u.values[u.mask] - plane(coords)
    near = np.linalg.norm(coords - x0, axis=-1) <= rho * np.sqrt(2.0)
    landscape = []
    for side in (1.0, -1.0):
        normal = side * normal0
        R = _complete_frame(normal, basis[: n - 1])
        y_n = (coords - x0) @ normal
        upper = near & (y_n > 0.5 * u.spacing)
        limit = float(np.min(vals[upper] / y_n[upper])) if np.any(upper) else 0.0
        a = _one_sided_slope(lambda t: v(x0 + t[:, None] * normal), u.spacing, max(limit, 0.0))

        def normalized(xi):
            x = x0 + rho * np.asarray(xi) @ R
            return (v(x) - a * rho * np.asarray(xi)[..., -1]) / rho**2

        for m in range(max_halvings + 1):
            H = H0 * 2.0**-m
            bnd = cylinder_boundary_samples(n, H)
            ub = normalized(bnd)
            hmax = max(float(ub.max()), 0.0)
            eta = max(1e-3 * hmax, 1e-6 * osc / rho**2)
            h = hmax + 2 * eta
            P = make_cylinder_barrier(h, H, n).shifted(-eta)
            center = np.zeros(n)
            center[-1] = H / 2
            margins = {
                "boundary": float(np.min(P(bnd) - ub)),
                "center": float(normalized(center) - P(center)),
                "ellipticity": float(1.0 - sigma_k(P.hessian(), 2)),
            }
            landscape.append({"side": side, "H": H, "h": float(h), "slope": a, **margins})
            if all(val > 0 for val in margins.values()):
                return Certificate(
                    tuple(map(float, x0)), tuple(tuple(map(float, r)) for r in R),
                    a, float(rho), float(h), float(H), float(eta), P, margins, plane,
                )
    return NoCertificate("no (h, H) with positive margins", landscape)


@dataclass
class TouchReport:
    status: str
    touches: bool
    sigma: float
    f: float
    gap_min: float
    reason: str = ""

    def to_dict(self):
        return dict(self.__dict__)


def viscosity_touch_test(u, phi, node, sense="above", f=1.0, k=2, radius=None, region=None):
    """Check the sub/supersolution inequality of u against the test function ``phi``.

    ``phi`` must touch u at ``node``: phi >= u (``above``) or phi <= u
    (``below``) on the region, with equality at the node, up to
    1e-9 osc(u). The region defaults to the nodes within ``radius``
    (default two grid spacings) of the node. Test functions outside the closed
    cone, or that do not touch, make the test inapplicable.
    """
    if sense not in ("above", "below"):
        raise ValueError("sense must be 'above' or 'below'")
    node = tuple(int(i) for i in node)
    A = phi.hessian()
    sigma = float(sigma_k(A, k))
    fval = float(f(u.node_coords(node)) if callable(f) else f)
    if not cone_membership(A, k, "closed").in_closure:
        return TouchReport("inapplicable", False, sigma, fval, float("nan"), "test function is not k-convex")
    if region is None:
        radius = 2 * u.spacing if radius is None else radius
        region = u.mask & (np.linalg.norm(u.coords - u.node_coords(node), axis=-1) <= radius + 1e-12)
    tol = 1e-9 * u.oscillation()
    diff = phi(u.coords) - u.values
    if sense == "below":
        diff = -diff
    gap_min = float(diff[region].min())
    touches = bool(region[node]) and gap_min >= -tol and abs(diff[node]) <= tol
    if not touches:
        return TouchReport("inapplicable", False, sigma, fval, gap_min, "test function does not touch u at the node")
    ok = sigma >= fval if sense == "above" else sigma <= fval
    return TouchReport("consistent" if ok else "violated", True, sigma, fval, gap_min)
