"""Uniform nodal grids with an exterior collar, and nodal functions on them.

CSV layout written by :func:`write_csv`::

    x[,y],value,mask          # header row; mask is "interior" or "collar"
    -1.0000000000000000e+00,0.0000000000000000e+00,collar
    ...

with a sidecar ``<name>.meta`` of ``key=value`` lines holding at least
``dim``, ``spacing``, ``collar_radius`` and ``far_field`` (plus the
parameters and domain when known).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .domains import Ball, Domain, Interval, Rectangle, as_points, domain_from_spec
from .kernel import FracParams

FLOAT_FMT = "%.16e"
DEFAULT_NODES = {1: 201, 2: 41}
# angles for the 2D far-field weight (integrand is continuous, kinks at corners)
FAR_ANGLES = 2880


@dataclass(frozen=True, eq=False)
class Grid:
    """Nodes of a uniform lattice; ``interior`` marks nodes inside the domain,
    every other node belongs to the collar."""

    points: np.ndarray
    spacing: float
    interior: np.ndarray
    delta: np.ndarray
    domain: Optional[Domain] = None
    collar_radius: float = 0.0
    far_field: bool = True
    axes: Optional[tuple] = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        interior = np.asarray(self.interior, dtype=bool)
        delta = np.asarray(self.delta, dtype=float)
        if interior.shape != (len(pts),) or delta.shape != (len(pts),):
            raise ValueError("interior mask and delta must have one entry per node")
        if np.any(delta[interior] <= 0) or np.any(delta[~interior] != 0):
            raise ValueError("delta must be positive on interior nodes and zero on the collar")
        for arr in (pts, interior, delta):
            arr.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "interior", interior)
        object.__setattr__(self, "delta", delta)

    # -- construction -----------------------------------------------------

    @classmethod
    def build(cls, domain: Domain, nodes: Optional[int] = None, collar_factor: float = 2.0,
              collar_radius: Optional[float] = None, far_field: bool = True) -> "Grid":
        """Lattice with ``nodes`` interior nodes across the first axis of the
        bounding box and a collar of width ``collar_radius`` (default
        ``collar_factor * diam``)."""
        dim = domain.dim
        n = DEFAULT_NODES[dim] if nodes is None else int(nodes)
        if n < 3:
            raise ValueError("need at least 3 nodes per axis")
        R = collar_factor * domain.diameter if collar_radius is None else float(collar_radius)
        if R < domain.diameter * (1 - 1e-12):
            raise ValueError(f"collar_radius {R} smaller than diam(domain) {domain.diameter}")
        lo, hi = domain.bbox
        h = float(hi[0] - lo[0]) / (n + 1)
        m = int(math.ceil(R / h - 1e-9))
        axes = []
        for k in range(dim):
            top = int(math.ceil((hi[k] - lo[k]) / h - 1e-9))
            axes.append(lo[k] + h * np.arange(-m, top + m + 1))
        if dim == 1:
            pts = axes[0].reshape(-1, 1)
        else:
            X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
            pts = np.column_stack([X.ravel(), Y.ravel()])
        delta = domain.distance(pts)
        interior = delta > 1e-9 * h
        delta = np.where(interior, delta, 0.0)
        return cls(pts, h, interior, delta, domain, R, far_field, tuple(axes))

    @classmethod
    def from_nodes(cls, points, interior, spacing: float, delta=None,
                   far_field: bool = False) -> "Grid":
        """Grid from explicit nodes, e.g. a hand-built small instance."""
        interior = np.asarray(interior, dtype=bool)
        if delta is None:
            delta = np.where(interior, float(spacing), 0.0)
        return cls(np.asarray(points, dtype=float), float(spacing), interior,
                   np.asarray(delta, dtype=float), None, 0.0, far_field, None)

    # -- properties -------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def collar(self) -> np.ndarray:
        return ~self.interior

    @property
    def interior_index(self) -> np.ndarray:
        return np.flatnonzero(self.interior)

    @property
    def collar_index(self) -> np.ndarray:
        return np.flatnonzero(~self.interior)

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def box(self):
        """Union of the node cells; the discretisation covers exactly this box."""
        half = 0.5 * self.spacing
        return self.points.min(axis=0) - half, self.points.max(axis=0) + half

    def far_weights(self, params: FracParams) -> np.ndarray:
        """``int_{outside box} |x_i - y|^-(N+sp) dy`` for every node (zeros
        when the far field is disabled)."""
        return self.far_weights_for(params.kernel_exponent)

    def far_weights_for(self, exponent: float) -> np.ndarray:
        if not self.far_field:
            return np.zeros(self.size)
        return _far_weights(self, exponent)


@lru_cache(maxsize=16)
def _far_weights(grid: Grid, exponent: float) -> np.ndarray:
    lo, hi = grid.box
    a = exponent - grid.dim  # = s p
    if grid.dim == 1:
        x = grid.points[:, 0]
        out = ((x - lo[0]) ** (-a) + (hi[0] - x) ** (-a)) / a
    else:
        theta = 2.0 * np.pi * (np.arange(FAR_ANGLES) + 0.5) / FAR_ANGLES
        e = np.column_stack([np.cos(theta), np.sin(theta)])
        out = np.empty(grid.size)
        for start in range(0, grid.size, 1024):
            x = grid.points[start:start + 1024]
            with np.errstate(divide="ignore"):
                tx = np.where(e[None, :, 0] > 0, (hi[0] - x[:, None, 0]) / e[None, :, 0],
                              (lo[0] - x[:, None, 0]) / e[None, :, 0])
                ty = np.where(e[None, :, 1] > 0, (hi[1] - x[:, None, 1]) / e[None, :, 1],
                              (lo[1] - x[:, None, 1]) / e[None, :, 1])
            rho = np.minimum(np.abs(tx), np.abs(ty))
            out[start:start + 1024] = (rho ** (-a)).sum(axis=1) * (2.0 * np.pi / FAR_ANGLES) / a
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "GridFunction":
        if isinstance(fn, (int, float)):
            return cls(grid, np.full(grid.size, float(fn)))
        return cls(grid, fn(grid.points))

    @classmethod
    def from_parts(cls, grid: Grid, interior_values, collar_values) -> "GridFunction":
        v = np.empty(grid.size)
        v[grid.interior] = interior_values
        v[~grid.interior] = collar_values
        return cls(grid, v)

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior]

    @property
    def collar_values(self) -> np.ndarray:
        return self.values[~self.grid.interior]

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def interpolate(self, x) -> np.ndarray:
        """Piecewise (multi)linear interpolation of the nodal values."""
        grid = self.grid
        pts = as_points(x, grid.dim)
        if grid.dim == 1:
            order = np.argsort(grid.points[:, 0], kind="stable")
            return np.interp(pts[:, 0], grid.points[order, 0], self.values[order],
                             left=np.nan, right=np.nan)
        if grid.axes is None:
            raise ValueError("interpolation in 2D needs a lattice grid")
        shape = tuple(len(a) for a in grid.axes)
        interp = RegularGridInterpolator(grid.axes, self.values.reshape(shape),
                                         bounds_error=False, fill_value=np.nan)
        return interp(pts)


# --------------------------------------------------------------------------
# CSV serialisation


def _domain_spec(domain) -> dict:
    if isinstance(domain, Interval):
        return {"domain": "interval", "a": domain.a, "b": domain.b}
    if isinstance(domain, Ball):
        return {"domain": "ball", "center": " ".join(repr(c) for c in domain.center),
                "radius": domain.radius}
    if isinstance(domain, Rectangle):
        return {"domain": "rectangle", "lo": " ".join(repr(c) for c in domain.lo),
                "hi": " ".join(repr(c) for c in domain.hi)}
    return {}


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".meta")


def write_csv(u: GridFunction, path, params: Optional[FracParams] = None) -> Path:
    path = Path(path)
    grid = u.grid
    cols = ["x", "y"][: grid.dim]
    lines = [",".join(cols + ["value", "mask"])]
    mask = np.where(grid.interior, "interior", "collar")
    for pt, val, m in zip(grid.points, u.values, mask):
        lines.append(",".join([FLOAT_FMT % c for c in pt] + [FLOAT_FMT % val, m]))
    path.write_text("\n".join(lines) + "\n")

    meta = {"dim": grid.dim, "spacing": FLOAT_FMT % grid.spacing,
            "collar_radius": FLOAT_FMT % grid.collar_radius,
            "far_field": str(grid.far_field).lower(), "nodes": grid.size}
    if params is not None:
        meta.update(s=repr(params.s), p=repr(params.p))
    meta.update(_domain_spec(grid.domain))
    sidecar_path(path).write_text("".join(f"{k}={v}\n" for k, v in meta.items()))
    return path


def read_meta(path) -> dict:
    meta = {}
    for line in sidecar_path(path).read_text().splitlines():
        if line.strip():
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    return meta


def read_csv(path) -> GridFunction:
    """Inverse of :func:`write_csv`."""
    path = Path(path)
    meta = read_meta(path)
    dim = int(meta["dim"])
    rows = path.read_text().splitlines()[1:]
    parts = [r.split(",") for r in rows if r]
    pts = np.array([[float(c) for c in r[:dim]] for r in parts])
    vals = np.array([float(r[dim]) for r in parts])
    interior = np.array([r[dim + 1] == "interior" for r in parts])
    domain = None
    kind = meta.get("domain")
    if kind == "interval":
        domain = Interval(float(meta["a"]), float(meta["b"]))
    elif kind == "ball":
        domain = domain_from_spec({"type": "ball", "radius": float(meta["radius"]),
                                   "center": [float(c) for c in meta["center"].split()]})
    elif kind == "rectangle":
        domain = domain_from_spec({"type": "rectangle",
                                   "lo": [float(c) for c in meta["lo"].split()],
                                   "hi": [float(c) for c in meta["hi"].split()]})
    h = float(meta["spacing"])
    if domain is not None:
        delta = np.where(interior, domain.distance(pts), 0.0)
    else:
        delta = np.where(interior, h, 0.0)
    axes = None
    if domain is not None and dim == 2:
        axes = tuple(np.unique(pts[:, k]) for k in range(2))
    grid = Grid(pts, h, interior, delta, domain, float(meta["collar_radius"]),
                meta["far_field"] == "true", axes)
    return GridFunction(grid, vals)
