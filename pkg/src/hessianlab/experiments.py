"""Numerical experiments on solved instances: the weighted Hessian functional
under a wall barrier, the flat-set modulus, and Hessian bounds at the origin.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .barriers import make_wall_barrier
from .grid import BoundaryProximityError, Domain, discrete_hessian, hessian_field, stencil_support
from .parallel import map_ordered
from .solver import DirichletProblem, solve_dirichlet
from .support import NonConvexityError, affine_fit, support_tolerance, supporting_plane


# -- boundary data ---------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryDatum:
    label: str
    g: object = field(compare=False)
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, x):
        return self.g(x)


def radial_datum(n, scale=1.0):
    alpha = np.sqrt(2.0 / (n * (n - 1)))
    return BoundaryDatum(
        f"radial-x{scale:g}", lambda x: scale * 0.5 * alpha * np.sum(np.asarray(x) ** 2, -1),
        {"alpha": alpha, "scale": scale},
    )


def sharp_datum(scale=1.0):
    return BoundaryDatum(
        f"sharp-x{scale:g}", lambda x: scale * (x[..., 0] ** 2 + x[..., 1] ** 2), {"scale": scale}
    )


def smooth_family(count, n, seed=0, cubic=0.05):
    """Convex quadratics with spectrum in [0.4, 1.2], plus a small cubic term.

    All draws come from ``numpy.random.default_rng(seed)``.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        lam = rng.uniform(0.4, 1.2, size=n)
        B = Q @ np.diag(lam) @ Q.T
        b = rng.normal(scale=0.1, size=n)
        a = rng.normal(size=n)
        a /= np.linalg.norm(a)

        def g(x, B=B, b=b, a=a):
            x = np.asarray(x, dtype=float)
            return 0.5 * np.einsum("...i,ij,...j->...", x, B, x) + x @ b + cubic * (x @ a) ** 3

        out.append(BoundaryDatum(f"smooth-{seed}-{i}", g, {"B": B.tolist(), "b": b.tolist(), "a": a.tolist()}))
    return out


def solve_family(data, n, resolution, domain=None, options=None):
    """Solve sigma_2 = 1 with each boundary datum; returns [(label, u, report)]."""
    domain = domain or Domain("ball", 1.0)

    def run(d):
        u, rep = solve_dirichlet(DirichletProblem(n, 2, domain, 1.0, d), resolution, options)
        return d.label, u, rep

    return map_ordered(run, data)


# -- weighted Hessian functional ----------------------------------------------------

def origin_component(mask, node):
    """Connected component (face neighbours) of ``mask`` containing ``node``."""
    if not mask[node]:
        return np.zeros_like(mask)
    labels, _ = ndimage.label(mask)
    return labels == labels[node]


def pogorelov_functional(u, w, region):
    """max over ``region`` of (w - u)^4 times the spectral norm of the discrete Hessian of u."""
    region = np.asarray(region, dtype=bool)
    if not region.any():
        raise ValueError("region is empty")
    gap = w(u.coords) - u.values
    bad = region & ~(gap > 0)
    if bad.any():
        node = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"region is not inside {{u < w}}: w - u = {gap[node]:.3e} at node {node}")
    unsupported = region & ~stencil_support(u)
    if unsupported.any():
        node = tuple(int(i) for i in np.argwhere(unsupported)[0])
        raise BoundaryProximityError(f"region node {node} has no full Hessian stencil")
    H = hessian_field(u)[region]
    norms = np.linalg.norm(H, ord=2, axis=(-2, -1))
    return float(np.max(gap[region] ** 4 * norms))


@dataclass(frozen=True)
class WallInfo:
    delta: float
    frame: tuple
    plane: object
    floor: float

    def to_dict(self):
        return {
            "delta": self.delta,
            "frame": [list(r) for r in self.frame],
            "plane": self.plane.to_dict(),
            "floor": self.floor,
        }


def _slab_samples(n, width, count=48, radius=1.0):
    # points with |y| = width (first two frame coordinates) and |x| <= radius
    ang = 2 * np.pi * np.arange(count) / count
    y = width * np.column_stack([np.cos(ang), np.sin(ang)])
    zmax = np.sqrt(max(radius**2 - width**2, 0.0))
    zs = np.linspace(-zmax, zmax, 9)
    if n == 3:
        return np.array([[*yy, z] for yy in y for z in zs])
    grids = np.meshgrid(*([zs] * (n - 2)), indexing="ij")
    Z = np.stack([g.ravel() for g in grids], axis=-1)
    Z = Z[np.linalg.norm(Z, axis=1) <= zmax]
    return np.array([[*yy, *z] for yy in y for z in Z])


def wall_barrier_for(u, node=None, safety=0.5, mode="slab"):
    """Wall barrier w = L + delta (2(n-2)|y|^2 - |z|^2 + 1/8) adapted to u.

    L supports u at the node; y spans the two directions of largest discrete
    curvature there and z the rest. With ``floor`` the smallest value of u - L
    on {|y| = 1/(2n)} inside the domain:

    * ``mode="slab"``: delta = safety * floor, so u > w on that set and the
      component of {u < w} containing the node stays in the slab;
    * ``mode="wide"``: delta = safety * floor * 2n^2/(n-2). For u - L close to
      a quadratic with curvature kappa along y, floor ~ kappa/(8n^2), and this
      delta keeps the growth 2(n-2)delta|y|^2 of w below kappa|y|^2/2, so the
      component is bounded but spans several grid cells.
    """
    if mode not in ("slab", "wide"):
        raise ValueError("mode must be 'slab' or 'wide'")
    n = u.n
    if n < 3:
        raise ValueError("the wall barrier needs n >= 3")
    node = u.origin_node if node is None else tuple(node)
    plane = supporting_plane(u, node)
    H = discrete_hessian(u, node).dense()
    evals, evecs = np.linalg.eigh(H)
    frame = evecs[:, np.argsort(evals, kind="stable")[::-1]].T
    x0 = np.asarray(plane.base_point)
    radius = (u.domain.R - np.linalg.norm(x0)) if u.domain.kind == "ball" else u.domain.R - np.abs(x0).max()
    xi = _slab_samples(n, 1.0 / (2 * n), radius=0.999 * radius)
    pts = x0 + xi @ frame
    floor = float(np.min(u(pts) - plane(pts)))
    if not floor > 0:
        raise ValueError(f"u - L is not positive on the slab boundary (min {floor:.3e})")
    delta = safety * floor
    if mode == "wide":
        delta *= 2 * n * n / (n - 2)
    w = make_wall_barrier(delta, n).compose_affine(frame, x0).plus(plane.as_form())
    return w, WallInfo(float(delta), tuple(tuple(map(float, r)) for r in frame), plane, floor)


def pogorelov_region(u, w, node=None):
    node = u.origin_node if node is None else tuple(node)
    return origin_component(u.mask & (u.values < w(u.coords)), node)


def pogorelov_value(u, w, node=None):
    return pogorelov_functional(u, w, pogorelov_region(u, w, node))


# -- flat-set modulus -------------------------------------------------------------

@dataclass
class MemberModulus:
    label: str
    delta: float
    capped: bool
    flagged: bool
    count: int
    sup_norm: float
    certificate: object = None

    def to_dict(self):
        d = {k: v for k, v in self.__dict__.items() if k != "certificate"}
        if self.certificate is not None:
            d["certificate"] = self.certificate.to_dict()
        return d


@dataclass
class ModulusTable:
    n: int
    K: float
    r: float
    members: list

    COLUMNS = ("n", "K", "r", "delta", "members", "flagged", "capped")

    @property
    def delta(self):
        vals = [m.delta for m in self.members if not m.flagged]
        return min(vals) if vals else 0.0

    @property
    def rows(self):
        return [
            (self.n, self.K, self.r, self.delta, len(self.members),
             sum(m.flagged for m in self.members), sum(m.capped for m in self.members))
        ]

    def to_dict(self):
        return {
            "columns": list(self.COLUMNS),
            "rows": [list(r) for r in self.rows],
            "members": [m.to_dict() for m in self.members],
        }


def member_modulus(u, r, node=None, label=""):
    """Largest delta such that {u < L + delta} lies within r of an (n-2)-subspace.

    Candidate deltas are the sorted values of u - L; the fit is checked by
    bisection over them (the flat set grows one node at a time). If every
    sublevel set fits, delta is capped at osc(u).
    """
    node = u.origin_node if node is None else tuple(node)
    n = u.n
    plane = supporting_plane(u, node)
    pts = u.coords[u.mask]
    vals = u.values[u.mask] - plane(pts)
    order = np.lexsort((np.arange(len(vals)), vals))
    pts, vals = pts[order], vals[order]
    anchor = np.asarray(plane.base_point)

    def fits(m):
        return affine_fit(pts[:m], r, anchor=anchor).widths[n - 2] <= r

    contact = max(1, int(np.sum(vals <= support_tolerance(u))))
    if not fits(contact):
        from .certificate import cylinder_certificate

        fit = affine_fit(pts[:contact], r, anchor=anchor)
        cert = cylinder_certificate(u, plane, fit)
        return MemberModulus(label, 0.0, False, True, contact, u.sup_norm(), cert)
    if fits(len(vals)):
        return MemberModulus(label, u.oscillation(), True, False, len(vals), u.sup_norm())
    lo, hi = contact, len(vals)  # fits(lo), not fits(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fits(mid):
            lo = mid
        else:
            hi = mid
    return MemberModulus(label, float(vals[lo]), False, False, lo, u.sup_norm())


def modulus_experiment(family, K, r, node=None):
    """Empirical delta(n, K, r): the family minimum of :func:`member_modulus`.

    ``family`` holds GridFunctions or (label, GridFunction) pairs.
    """
    items = [(f"member-{i}", m) if not isinstance(m, tuple) else m for i, m in enumerate(family)]
    if not items:
        raise ValueError("empty family")
    for label, u in items:
        if u.sup_norm() > K * (1 + 1e-12):
            raise ValueError(f"{label}: sup norm {u.sup_norm():.6g} exceeds K = {K}")
    members = map_ordered(lambda it: member_modulus(it[1], r, node, it[0]), items)
    return ModulusTable(items[0][1].n, float(K), float(r), members)


# -- Hessian at the origin -------------------------------------------------------

@dataclass
class C2Table:
    rows: list

    COLUMNS = ("label", "resolution", "sup_norm", "hessian_norm")

    def values(self, label):
        return [(r[1], r[3]) for r in self.rows if r[0] == label]

    def labels(self):
        seen = []
        for r in self.rows:
            if r[0] not in seen:
                seen.append(r[0])
        return seen

    def refinement_change(self, label):
        """Relative change of the Hessian norm between the two finest resolutions."""
        vals = sorted(self.values(label))
        if len(vals) < 2:
            return float("nan")
        a, b = vals[-2][1], vals[-1][1]
        return abs(b - a) / max(abs(b), 1e-300)

    def bucket_max(self, edges):
        """Largest Hessian norm per sup-norm bucket [edges[i], edges[i+1])."""
        out = []
        for lo, hi in zip(edges, edges[1:]):
            vals = [r[3] for r in self.rows if lo <= r[2] < hi]
            out.append((lo, hi, max(vals) if vals else None))
        return out

    def to_dict(self):
        return {"columns": list(self.COLUMNS), "rows": [list(r) for r in self.rows]}


def c2_at_origin_experiment(data, resolutions, n=3, domain=None, options=None):
    """Solve sigma_2 = 1 on the ball for each datum and resolution; tabulate
    (label, resolution, sup norm of u, spectral norm of D_h^2 u at the origin).
    """
    domain = domain or Domain("ball", 1.0)
    jobs = [(d, N) for d in data for N in resolutions]

    def run(job):
        d, N = job
        u, _ = solve_dirichlet(DirichletProblem(n, 2, domain, 1.0, d), N, options)
        H = discrete_hessian(u, u.origin_node).dense()
        return (d.label, N, u.sup_norm(), float(np.linalg.norm(H, 2)))

    return C2Table(map_ordered(run, jobs))


__all__ = [
    "BoundaryDatum",
    "C2Table",
    "MemberModulus",
    "ModulusTable",
    "NonConvexityError",
    "WallInfo",
    "c2_at_origin_experiment",
    "member_modulus",
    "modulus_experiment",
    "origin_component",
    "pogorelov_functional",
    "pogorelov_region",
    "pogorelov_value",
    "radial_datum",
    "sharp_datum",
    "smooth_family",
    "solve_family",
    "wall_barrier_for",
]
