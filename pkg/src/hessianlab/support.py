"""Supporting planes of convex grid functions, their sublevel flat sets, and
dimension audits of those sets by principal-axes fitting.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .barriers import QuadraticForm
from .parallel import map_ordered

SUPPORT_RTOL = 1e-9
AUDIT_DELTAS = (1e-2, 1e-3, 1e-4)


class NonConvexityError(ValueError):
    """No plane through the base node stays below the grid function."""

    def __init__(self, message, node):
        super().__init__(message)
        self.node = node


def support_tolerance(u):
    return SUPPORT_RTOL * u.oscillation()


@dataclass(frozen=True)
class SupportingPlane:
    """L(x) = value + slope . (x - base_point), with gap = min over nodes of u - L."""

    node: tuple
    base_point: tuple
    slope: tuple
    value: float
    gap: float = 0.0

    @property
    def n(self):
        return len(self.slope)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.value + (x - np.asarray(self.base_point)) @ np.asarray(self.slope)

    def as_form(self):
        p = np.asarray(self.slope)
        return QuadraticForm.linear(p, self.value - p @ np.asarray(self.base_point))

    def to_dict(self):
        return {
            "node": list(self.node),
            "base_point": list(self.base_point),
            "slope": list(self.slope),
            "value": self.value,
            "gap": self.gap,
        }


def _reference_slope(u, node):
    # central differences; second-order one-sided ones where a neighbour is
    # outside the domain (both exact on quadratics)
    v, h = u.values, u.spacing

    def at(i, s):
        idx = list(node)
        idx[i] += s
        ok = 0 <= idx[i] <= u.resolution and u.mask[tuple(idx)]
        return v[tuple(idx)] if ok else None

    p = np.zeros(u.n)
    for i in range(u.n):
        up, dn = at(i, 1), at(i, -1)
        if up is not None and dn is not None:
            p[i] = (up - dn) / (2 * h)
            continue
        for s, near in ((1, up), (-1, dn)):
            if near is None:
                continue
            far = at(i, 2 * s)
            if far is not None:
                p[i] = s * (-3 * v[node] + 4 * near - far) / (2 * h)
            else:
                p[i] = s * (near - v[node]) / h
    return p


def supporting_plane(u, node=None, tol=None, prefer_reference=True):
    """Supporting linear function of the grid function ``u`` at ``node``.

    The central-difference slope is returned when it already supports u.
    Otherwise two linear programs over all nodes of the closed domain are
    solved: the first minimizes max (L - u) and detects non-convexity, the
    second picks among supporting slopes the one closest (sup norm) to the
    central-difference slope. ``prefer_reference=False`` always runs the
    programs.
    """
    node = u.origin_node if node is None else tuple(int(i) for i in node)
    if not u.mask[node]:
        raise ValueError(f"node {node} is outside the domain")
    tol = support_tolerance(u) if tol is None else tol
    x0 = u.node_coords(node)
    u0 = float(u.values[node])
    idx = np.argwhere(u.mask)
    d = u.coords[u.mask] - x0
    gap = u.values[u.mask] - u0

    def result(p):
        slack = gap - d @ p
        return SupportingPlane(node, tuple(map(float, x0)), tuple(map(float, p)), u0, float(slack.min()))

    p_ref = _reference_slope(u, node)
    if prefer_reference and np.all(d @ p_ref <= gap + tol):
        return result(p_ref)

    # normalized units: offsets by their max length, values by the oscillation
    sd = float(np.abs(d).max()) or 1.0
    so = u.oscillation() or 1.0
    dn, gn, tn = d / sd, gap / so, tol / so
    pref_n = p_ref * sd / so
    bound = 2.0 * sd / u.spacing + np.abs(pref_n).max()
    m, n = dn.shape
    opts = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}

    A1 = np.hstack([dn, -np.ones((m, 1))])
    res = linprog(
        np.r_[np.zeros(n), 1.0], A_ub=A1, b_ub=gn,
        bounds=[(-bound, bound)] * n + [(None, None)], method="highs", options=opts,
    )
    if res.status != 0:
        raise RuntimeError(f"support LP failed: {res.message}")
    if res.x[-1] > tn:
        p = res.x[:n]
        worst = tuple(int(i) for i in idx[np.argmax(dn @ p - gn)])
        raise NonConvexityError(
            f"u is not convex at node {node}: every plane through it exceeds u by "
            f"{res.x[-1] * so:.3e} (worst node {worst})",
            worst,
        )

    # phase 2: closest supporting slope to the central-difference slope
    eye = np.eye(n)
    A2 = np.vstack([
        np.hstack([dn, np.zeros((m, 1))]),
        np.hstack([eye, -np.ones((n, 1))]),
        np.hstack([-eye, -np.ones((n, 1))]),
    ])
    b2 = np.r_[gn + 0.5 * tn, pref_n, -pref_n]
    res = linprog(
        np.r_[np.zeros(n), 1.0], A_ub=A2, b_ub=b2,
        bounds=[(-bound, bound)] * n + [(0, None)], method="highs", options=opts,
    )
    if res.status != 0:
        raise RuntimeError(f"support LP failed: {res.message}")
    plane = result(res.x[:n] * so / sd)
    if plane.gap < -tol:
        raise RuntimeError(f"support LP returned an infeasible slope (gap {plane.gap:.3e})")
    return plane


@dataclass(frozen=True)
class FlatSet:
    delta: float
    mask: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.points)

    def issubset(self, other):
        return bool(np.all(other.mask[self.mask]))


def sublevel_flat_set(u, plane, delta):
    """Nodes of the closed domain where u < L + delta."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    mask = u.mask & (u.values - plane(u.coords) < delta)
    # the base node always qualifies
    mask[plane.node] = True
    return FlatSet(float(delta), mask, u.coords[mask])


@dataclass(frozen=True)
class AffineFitReport:
    """Best-fit affine subspaces origin + span(basis[:d]) for d = 0..n."""

    dimension: int
    origin: tuple
    basis: tuple
    widths: tuple
    r: float

    def subspace(self, d=None):
        d = self.dimension if d is None else d
        return np.asarray(self.origin), np.asarray(self.basis)[:d]

    def to_dict(self):
        return {
            "dimension": self.dimension,
            "origin": list(self.origin),
            "basis": [list(b) for b in self.basis],
            "widths": list(self.widths),
            "r": self.r,
        }


def affine_fit(points, r, anchor=None):
    """Principal-axes fit of a point set.

    Axes are the eigenvectors of the second-moment matrix about ``anchor``
    (the centroid when omitted). ``widths[d]`` is the largest distance of a
    point to the d-dimensional subspace spanned by the leading axes; the
    reported dimension is the smallest d with widths[d] <= r.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("affine_fit needs at least one point")
    n = pts.shape[1]
    origin = pts.mean(axis=0) if anchor is None else np.asarray(anchor, dtype=float)
    Y = pts - origin
    evals, evecs = np.linalg.eigh(Y.T @ Y)
    order = np.argsort(evals, kind="stable")[::-1]
    V = evecs[:, order]
    # fix signs so the largest component of each axis is positive
    V = V * np.where(V[np.argmax(np.abs(V), axis=0), np.arange(n)] < 0, -1.0, 1.0)
    C2 = (Y @ V) ** 2
    tail = np.cumsum(C2[:, ::-1], axis=1)[:, ::-1]
    widths = [float(np.sqrt(tail[:, d].max())) for d in range(n)] + [0.0]
    widths = np.minimum.accumulate(widths)
    dim = int(np.argmax(widths <= r))
    return AffineFitReport(
        dim, tuple(map(float, origin)), tuple(tuple(map(float, v)) for v in V.T),
        tuple(map(float, widths)), float(r),
    )


@dataclass
class NodeAudit:
    node: tuple
    plane: SupportingPlane
    levels: list
    fit: AffineFitReport

    @property
    def dimension(self):
        return self.fit.dimension

    def to_dict(self):
        return {
            "node": list(self.node),
            "plane": self.plane.to_dict(),
            "levels": self.levels,
            "dimension": self.dimension,
            "fit": self.fit.to_dict(),
        }


@dataclass
class AuditReport:
    n: int
    deltas: tuple
    r: float
    nodes: list
    certificates: list = field(default_factory=list)

    @property
    def offenders(self):
        return [a.node for a in self.nodes if a.dimension > self.n - 2]

    @property
    def passed(self):
        return not self.offenders

    @property
    def status(self):
        return "PASS" if self.passed else "FAIL"

    def to_dict(self):
        return {
            "status": self.status,
            "n": self.n,
            "deltas": list(self.deltas),
            "r": self.r,
            "nodes": [a.to_dict() for a in self.nodes],
            "offenders": [list(o) for o in self.offenders],
            "certificates": [c.to_dict() for c in self.certificates],
        }


def audit_node(u, node, deltas=AUDIT_DELTAS, r=None):
    r = 0.5 * u.spacing if r is None else r
    plane = supporting_plane(u, node)
    osc = u.oscillation() or 1.0
    levels, fit = [], None
    for rel in sorted(deltas, reverse=True):
        flat = sublevel_flat_set(u, plane, rel * osc)
        fit = affine_fit(flat.points, r, anchor=plane.base_point)
        levels.append({"delta": rel * osc, "count": len(flat), "dimension": fit.dimension, "widths": list(fit.widths)})
    return NodeAudit(tuple(node), plane, levels, fit)


def strict_2convexity_audit(u, nodes=None, deltas=AUDIT_DELTAS, r=None, certify=True):
    """Flat-set dimension audit at each sample node.

    Flat sets {u < L + delta} are measured at delta = rel * osc(u) for each
    ``rel`` in ``deltas``; the estimated dimension at the smallest delta must
    be at most n - 2. Offending nodes are passed to the certificate search
    when ``certify`` is set.
    """
    nodes = [u.origin_node] if nodes is None else [tuple(int(i) for i in nd) for nd in nodes]
    r = 0.5 * u.spacing if r is None else float(r)
    audits = map_ordered(lambda nd: audit_node(u, nd, deltas, r), nodes)
    report = AuditReport(u.n, tuple(deltas), r, audits)
    if certify:
        from .certificate import cylinder_certificate

        for a in audits:
            if a.dimension > u.n - 2:
                report.certificates.append(cylinder_certificate(u, a.plane, a.fit))
    return report
