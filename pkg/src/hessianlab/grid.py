"""Uniform grids over boxes [-R, R]^n and balls B_R, and functions sampled on them."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .algebra import SymmetricMatrix

MAGIC = b"HGF1"


class BoundaryProximityError(ValueError):
    """A finite-difference stencil would leave the domain."""


@dataclass(frozen=True)
class Domain:
    kind: str = "ball"
    R: float = 1.0

    def __post_init__(self):
        if self.kind not in ("box", "ball"):
            raise ValueError(f"domain kind must be 'box' or 'ball', got {self.kind!r}")
        if not self.R > 0:
            raise ValueError("domain radius must be positive")

    def contains(self, x, closed=True, tol=0.0):
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            size = np.max(np.abs(x), axis=-1)
        else:
            size = np.linalg.norm(x, axis=-1)
        return size <= self.R + tol if closed else size < self.R - tol

    def project(self, x):
        """Closest point of the closed domain (radial projection for balls)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "box":
            return np.clip(x, -self.R, self.R)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        scale = np.where(r > self.R, self.R / np.where(r > 0, r, 1.0), 1.0)
        return x * scale


@dataclass
class GridFunction:
    """Values on the (N+1)^n node lattice covering [-R, R]^n.

    ``resolution`` is the number of intervals per axis. Nodes outside a ball
    domain hold the boundary value at their radial projection so that every
    stored value stays finite; ``mask`` marks the closed domain.
    """

    n: int
    resolution: int
    domain: Domain
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    @property
    def shape(self):
        return (self.resolution + 1,) * self.n

    @property
    def spacing(self):
        return 2.0 * self.domain.R / self.resolution

    @cached_property
    def axis(self):
        return np.linspace(-self.domain.R, self.domain.R, self.resolution + 1)

    @cached_property
    def coords(self):
        return np.stack(np.meshgrid(*([self.axis] * self.n), indexing="ij"), axis=-1)

    @cached_property
    def mask(self):
        if self.domain.kind == "box":
            return np.ones(self.shape, dtype=bool)
        r = np.linalg.norm(self.coords, axis=-1)
        return r <= self.domain.R * (1 + 1e-12)

    @cached_property
    def interior(self):
        if self.domain.kind == "box":
            m = np.zeros(self.shape, dtype=bool)
            m[(slice(1, -1),) * self.n] = True
            return m
        r = np.linalg.norm(self.coords, axis=-1)
        return r < self.domain.R * (1 - 1e-12)

    def with_values(self, values):
        return GridFunction(self.n, self.resolution, self.domain, values)

    def node_coords(self, node):
        return np.array([self.axis[i] for i in node])

    def nearest_node(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.rint((x + self.domain.R) / self.spacing).astype(int)
        return tuple(int(i) for i in np.clip(idx, 0, self.resolution))

    @property
    def origin_node(self):
        return self.nearest_node(np.zeros(self.n))

    def oscillation(self):
        v = self.values[self.mask]
        return float(v.max() - v.min())

    def sup_norm(self):
        return float(np.abs(self.values[self.mask]).max())

    def interpolator(self):
        return RegularGridInterpolator(
            (self.axis,) * self.n, self.values, method="linear", bounds_error=False, fill_value=None
        )

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.n)
        return self.interpolator()(flat).reshape(x.shape[:-1])


def sample(f, n, resolution, domain=None):
    """Sample ``f`` (vectorized over trailing coordinate axis) on a grid."""
    domain = domain or Domain("box", 1.0)
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    probe = GridFunction(n, resolution, domain, np.zeros((resolution + 1,) * n))
    pts = domain.project(probe.coords)
    return probe.with_values(np.asarray(f(pts), dtype=float))


def _shift(a, offset, fill):
    # out[x] = a[x + offset]
    out = np.full_like(a, fill)
    src, dst = [], []
    for o, size in zip(offset, a.shape):
        if o >= 0:
            src.append(slice(o, size))
            dst.append(slice(0, size - o))
        else:
            src.append(slice(0, size + o))
            dst.append(slice(-o, size))
    out[tuple(dst)] = a[tuple(src)]
    return out


def stencil_deltas(n):
    """Neighbour offsets touched by the central Hessian stencil."""
    out = []
    for i in range(n):
        for s in (1, -1):
            d = [0] * n
            d[i] = s
            out.append(tuple(d))
    for i, j in combinations(range(n), 2):
        for a in (1, -1):
            for b in (1, -1):
                d = [0] * n
                d[i], d[j] = a, b
                out.append(tuple(d))
    return out


def stencil_support(u):
    """Nodes whose whole Hessian stencil lies in the closed domain."""
    ok = u.interior.copy()
    for d in stencil_deltas(u.n):
        ok &= _shift(u.mask, d, False)
    return ok


def hessian_field(u):
    """Central-difference Hessians at every node with full stencil support.

    Returns an array of shape grid_shape + (n, n); rows without support are zero.
    Use :func:`stencil_support` for the validity mask.
    """
    v = u.values
    h2 = u.spacing**2
    n = u.n
    H = np.zeros(u.shape + (n, n))
    for i in range(n):
        e = [0] * n
        e[i] = 1
        ep = tuple(e)
        em = tuple(-x for x in e)
        H[..., i, i] = (_shift(v, ep, 0.0) - 2 * v + _shift(v, em, 0.0)) / h2
    for i, j in combinations(range(n), 2):
        def off(a, b):
            d = [0] * n
            d[i], d[j] = a, b
            return tuple(d)

        val = (
            _shift(v, off(1, 1), 0.0)
            - _shift(v, off(1, -1), 0.0)
            - _shift(v, off(-1, 1), 0.0)
            + _shift(v, off(-1, -1), 0.0)
        ) / (4 * h2)
        H[..., i, j] = val
        H[..., j, i] = val
    H[~stencil_support(u)] = 0.0
    return H


def discrete_hessian(u, node):
    """Second-order central-difference Hessian at one node."""
    node = tuple(int(i) for i in node)
    if len(node) != u.n:
        raise ValueError("node index has wrong dimension")
    for d in stencil_deltas(u.n):
        nb = tuple(a + o for a, o in zip(node, d))
        if any(i < 0 or i > u.resolution for i in nb) or not u.mask[nb]:
            raise BoundaryProximityError(f"stencil at node {node} leaves the domain at {nb}")
    v = u.values
    h2 = u.spacing**2
    n = u.n
    H = np.zeros((n, n))

    def at(*pairs):
        idx = list(node)
        for ax, d in pairs:
            idx[ax] += d
        return v[tuple(idx)]

    for i in range(n):
        H[i, i] = (at((i, 1)) - 2 * v[node] + at((i, -1))) / h2
    for i, j in combinations(range(n), 2):
        H[i, j] = H[j, i] = (
            at((i, 1), (j, 1)) - at((i, 1), (j, -1)) - at((i, -1), (j, 1)) + at((i, -1), (j, -1))
        ) / (4 * h2)
    return SymmetricMatrix.from_dense(H)


def write_grid(path, u):
    """Flat binary snapshot: b"HGF1", uint32 n, uint32 node counts, float64 spacing, float64 values (C order)."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", u.n))
        fh.write(struct.pack(f"<{u.n}I", *u.shape))
        fh.write(struct.pack("<d", u.spacing))
        fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())


def read_grid(path, domain_kind="box"):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError(f"{path}: not an HGF1 grid file")
    (n,) = struct.unpack_from("<I", data, 4)
    shape = struct.unpack_from(f"<{n}I", data, 8)
    off = 8 + 4 * n
    (spacing,) = struct.unpack_from("<d", data, off)
    off += 8
    values = np.frombuffer(data, dtype="<f8", offset=off).reshape(shape)
    if len(set(shape)) != 1:
        raise ValueError("only cubical grids are supported")
    resolution = shape[0] - 1
    R = spacing * resolution / 2.0
    return GridFunction(n, resolution, Domain(domain_kind, R), values.astype(float))
