"""Bounded domains with exact distance-to-complement functions.

Points are passed as arrays of shape ``(n, dim)``; a single point may be
given as a sequence of length ``dim`` (or a scalar in 1D).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


def as_points(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to a float array of shape ``(n, dim)``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dim == 1 else arr.reshape(1, -1)
    if arr.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {arr.shape}")
    return arr


def _positive_roots(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float).ravel()
    rho = rho[np.isfinite(rho) & (rho > 0)]
    return np.unique(rho)


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError(f"empty interval ({self.a}, {self.b})")

    dim = 1

    @property
    def center(self) -> np.ndarray:
        return np.array([0.5 * (self.a + self.b)])

    @property
    def diameter(self) -> float:
        return float(self.b - self.a)

    @property
    def inradius(self) -> float:
        return 0.5 * self.diameter

    @property
    def bbox(self):
        return np.array([self.a]), np.array([self.b])

    @property
    def singular_points(self) -> np.ndarray:
        return np.array([[self.a], [self.b], [0.5 * (self.a + self.b)]])

    def distance(self, x) -> np.ndarray:
        t = as_points(x, 1)[:, 0]
        return np.maximum(np.minimum(t - self.a, self.b - t), 0.0)

    def ridge_gap(self, x) -> np.ndarray:
        return np.abs(as_points(x, 1)[:, 0] - self.center[0])

    def ray_breaks(self, x, e) -> np.ndarray:
        x0, e0 = float(np.ravel(x)[0]), float(np.ravel(e)[0])
        return _positive_roots((np.array([self.a, self.b, self.center[0]]) - x0) / e0)


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.center))
        if len(c) not in (1, 2):
            raise ValueError("ball center must have dimension 1 or 2")
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def _c(self) -> np.ndarray:
        return np.asarray(self.center)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def inradius(self) -> float:
        return float(self.radius)

    @property
    def bbox(self):
        return self._c - self.radius, self._c + self.radius

    @property
    def singular_points(self) -> np.ndarray:
        if self.dim == 1:
            c = self.center[0]
            return np.array([[c - self.radius], [c + self.radius], [c]])
        return self._c.reshape(1, 2)

    def distance(self, x) -> np.ndarray:
        r = np.linalg.norm(as_points(x, self.dim) - self._c, axis=1)
        return np.maximum(self.radius - r, 0.0)

    def ridge_gap(self, x) -> np.ndarray:
        return np.linalg.norm(as_points(x, self.dim) - self._c, axis=1)

    def ray_breaks(self, x, e) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        e = np.asarray(e, dtype=float).ravel()
        w = x - self._c
        b = float(w @ e)
        disc = b * b - (float(w @ w) - self.radius**2)
        roots = [-b]
        if disc >= 0:
            sq = np.sqrt(disc)
            roots += [-b - sq, -b + sq]
        return _positive_roots(roots)


@dataclass(frozen=True)
class Rectangle:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 2 or len(hi) != 2:
            raise ValueError("rectangle corners must be 2D")
        if not all(h > l for l, h in zip(lo, hi)):
            raise ValueError(f"empty rectangle {lo} x {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    dim = 2

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    @property
    def inradius(self) -> float:
        return 0.5 * float(np.min(np.subtract(self.hi, self.lo)))

    @property
    def bbox(self):
        return np.asarray(self.lo), np.asarray(self.hi)

    @property
    def singular_points(self) -> np.ndarray:
        return np.empty((0, 2))

    def _side_distances(self, pts) -> np.ndarray:
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return np.column_stack([pts[:, 0] - lo[0], hi[0] - pts[:, 0],
                                pts[:, 1] - lo[1], hi[1] - pts[:, 1]])

    def distance(self, x) -> np.ndarray:
        d = self._side_distances(as_points(x, 2))
        return np.maximum(d.min(axis=1), 0.0)

    def ridge_gap(self, x) -> np.ndarray:
        d = np.sort(self._side_distances(as_points(x, 2)), axis=1)
        return 0.5 * (d[:, 1] - d[:, 0])

    def ray_breaks(self, x, e) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(1, 2)
        e = np.asarray(e, dtype=float).ravel()
        d0 = self._side_distances(x)[0]
        v = np.array([e[0], -e[0], e[1], -e[1]])
        roots = []
        with np.errstate(divide="ignore", invalid="ignore"):
            roots.extend(-d0 / v)
            for k in range(4):
                for l in range(k + 1, 4):
                    roots.append((d0[l] - d0[k]) / (v[k] - v[l]))
        return _positive_roots(roots)


Domain = Union[Interval, Ball, Rectangle]


def domain_from_spec(spec: dict) -> Domain:
    """Build a domain from a plain mapping (as read from a config file)."""
    kind = spec.get("type")
    if kind == "interval":
        return Interval(float(spec["a"]), float(spec["b"]))
    if kind == "ball":
        return Ball(tuple(np.atleast_1d(spec["center"]).tolist()), float(spec["radius"]))
    if kind == "rectangle":
        return Rectangle(tuple(spec["lo"]), tuple(spec["hi"]))
    raise ValueError(f"unknown domain type {kind!r}")
