"""Shared vocabulary: parameters, signed powers, closed-form functions,
the weighted tail integral and the discrete Gagliardo double sum.

The normalisation constant of the operator is fixed to 1 throughout; every
quantity checked by this package is a sign or ratio statement, which a
positive constant does not affect.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate

from .domains import as_points
from .errors import TailDivergent

P_MIN = 1.01
P_MAX = 50.0

# row block size for pairwise sums; per-row partial sums are merged with
# math.fsum, so the result does not depend on the blocking
PAIR_CHUNK = 256


@dataclass(frozen=True)
class FracParams:
    """Fractional order ``s``, integrability exponent ``p`` and dimension."""

    s: float
    p: float
    dim: int = 1
    norm_const: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s out of range (0, 1): {self.s}")
        if not P_MIN <= self.p <= P_MAX:
            raise ValueError(f"p out of range [{P_MIN}, {P_MAX}]: {self.p}")
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.norm_const != 1.0:
            raise ValueError("norm_const is fixed to 1")

    @property
    def sp(self) -> float:
        return self.s * self.p

    @property
    def kernel_exponent(self) -> float:
        """Exponent of ``|x - y|`` in the kernel denominator."""
        return self.dim + self.s * self.p


def signed_power(t, q):
    """Return ``|t|**(q-1) * t``, the odd extension of ``t**q``."""
    if q <= 0:
        raise ValueError(f"signed_power needs q > 0, got {q}")
    t = np.asarray(t, dtype=float)
    out = np.sign(t) * np.abs(t) ** q
    return out if out.ndim else float(out)


def sphere_measure(dim: int) -> float:
    """Surface measure of the unit sphere in ``R^dim`` (2 in 1D, 2*pi in 2D)."""
    return 2.0 if dim == 1 else 2.0 * math.pi


def unit_ball_volume(dim: int) -> float:
    return 2.0 if dim == 1 else math.pi


# --------------------------------------------------------------------------
# closed-form functions


@dataclass(frozen=True)
class CompactSupport:
    radius: float


@dataclass(frozen=True)
class Bounded:
    bound: float


@dataclass(frozen=True)
class PowerGrowth:
    exponent: float


TailClass = Union[CompactSupport, Bounded, PowerGrowth]

SMOOTHNESS_TAGS = ("C2_everywhere", "C2_except_listed_points", "continuous_only")


@dataclass(frozen=True, eq=False)
class ClosedFormFunction:
    """A function on all of ``R^dim`` together with the metadata the
    quadrature needs: where it fails to be smooth and how it behaves at
    infinity.

    ``evaluator`` maps an ``(n, dim)`` array to ``n`` values.  In 2D,
    ``ray_breaks(x, e)`` may return the radii ``rho > 0`` at which the ray
    ``x + rho * e`` crosses a non-smooth curve of the function; quadrature
    panels are split there.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    dim: int = 1
    smoothness: str = "C2_everywhere"
    tail: TailClass = field(default_factory=lambda: Bounded(np.inf))
    singular_points: np.ndarray = field(default_factory=lambda: np.empty((0, 1)))
    ray_breaks: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    name: str = ""

    def __post_init__(self):
        if self.smoothness not in SMOOTHNESS_TAGS:
            raise ValueError(f"unknown smoothness tag {self.smoothness!r}")
        pts = np.asarray(self.singular_points, dtype=float).reshape(-1, self.dim)
        object.__setattr__(self, "singular_points", pts)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.evaluator(as_points(x, self.dim)), dtype=float)

    def breaks_along(self, x: np.ndarray, e: np.ndarray) -> np.ndarray:
        """Radii at which ``x + rho * e`` meets a non-smooth location."""
        out = []
        if self.ray_breaks is not None:
            out.append(np.asarray(self.ray_breaks(x, e), dtype=float).ravel())
        if len(self.singular_points):
            w = self.singular_points - x
            along = w @ e
            perp = np.linalg.norm(w - along[:, None] * e, axis=1)
            hit = (along > 0) & (perp <= 1e-12 * (1.0 + np.abs(along)))
            out.append(along[hit])
        if isinstance(self.tail, CompactSupport):
            # support boundary sphere |y| = radius
            b = float(x @ e)
            disc = b * b - (float(x @ x) - self.tail.radius**2)
            if disc > 0:
                sq = math.sqrt(disc)
                out.append(np.array([-b - sq, -b + sq]))
        if not out:
            return np.empty(0)
        rho = np.concatenate(out)
        return np.unique(rho[np.isfinite(rho) & (rho > 0)])


def tail_is_finite(tail: TailClass, params: FracParams) -> bool:
    if isinstance(tail, PowerGrowth):
        return tail.exponent * (params.p - 1.0) < params.sp
    return True


def tail_norm(u: ClosedFormFunction, params: FracParams, quad=None):
    """Weighted tail integral of ``|u|**(p-1)`` against ``(1+|x|)**-(N+sp)``.

    Divergence is decided from the declared tail class, since a truncated
    quadrature cannot detect it.

    Returns
    -------
    (value, abserr) : tuple of float
    """
    if not tail_is_finite(u.tail, params):
        raise TailDivergent(
            f"power growth {u.tail.exponent} with p={params.p}, s={params.s}: "
            f"gamma*(p-1) >= s*p"
        )
    q = params.p - 1.0
    expo = params.kernel_exponent
    limit = u.tail.radius if isinstance(u.tail, CompactSupport) else np.inf

    if params.dim == 1:
        def g(t):
            return abs(float(u(np.array([[t]]))[0])) ** q / (1.0 + abs(t)) ** expo

        cuts = sorted({0.0, *u.singular_points[:, 0].tolist()})
        cuts = [c for c in cuts if abs(c) < limit]
        if np.isfinite(limit):
            edges = [-limit, *cuts, limit]
        else:
            lo, hi = min(cuts[0], -1.0), max(cuts[-1], 1.0)
            edges = [-np.inf, lo, *[c for c in cuts if lo < c < hi], hi, np.inf]
        total = err = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            if a == b:
                continue
            val, e = integrate.quad(g, a, b, limit=200, epsabs=1e-13, epsrel=1e-11)
            total += val
            err += e
        return total, err

    def g2(r, theta):
        pt = np.array([[r * math.cos(theta), r * math.sin(theta)]])
        return abs(float(u(pt)[0])) ** q * r / (1.0 + r) ** expo

    val, err = integrate.dblquad(g2, 0.0, 2.0 * math.pi, 0.0, limit,
                                 epsabs=1e-10, epsrel=1e-8)
    return val, err


# --------------------------------------------------------------------------
# discrete pairwise sums


def kernel_rows(xi: np.ndarray, xj: np.ndarray, exponent: float) -> np.ndarray:
    """``|xi - xj|**-exponent`` for all pairs, zero where the points coincide."""
    diff = xi[:, None, :] - xj[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    with np.errstate(divide="ignore"):
        k = r2 ** (-0.5 * exponent)
    k[r2 == 0.0] = 0.0
    return k


def gagliardo_seminorm(u, params: FracParams) -> float:
    """Discrete double sum ``sum_{i != j} |u_i-u_j|^p / |x_i-x_j|^(N+sp) h^(2N)``.

    ``u`` is a :class:`~fraclap.grid.GridFunction`.  The sum runs over
    ordered pairs of all grid nodes (interior and collar); node pairs where
    both values vanish contribute nothing and are skipped.
    """
    grid = u.grid
    vals = np.asarray(u.values, dtype=float)
    pts = grid.points
    expo = params.kernel_exponent
    p = params.p
    active = np.flatnonzero(vals != 0.0)
    if active.size == 0:
        return 0.0
    if active.size == vals.size:
        idle = np.empty(0, dtype=int)
    else:
        idle = np.flatnonzero(vals == 0.0)
    xa, va = pts[active], vals[active]
    xz = pts[idle]
    partial = []
    for start in range(0, active.size, PAIR_CHUNK):
        sl = slice(start, start + PAIR_CHUNK)
        k_aa = kernel_rows(xa[sl], xa, expo)
        rows = (np.abs(va[sl, None] - va[None, :]) ** p * k_aa).sum(axis=1)
        if idle.size:
            k_az = np.zeros(k_aa.shape[0])
            for zs in range(0, idle.size, 4 * PAIR_CHUNK):
                k_az += kernel_rows(xa[sl], xz[zs:zs + 4 * PAIR_CHUNK], expo).sum(axis=1)
            rows = rows + 2.0 * np.abs(va[sl]) ** p * k_az
        partial.extend(rows.tolist())
    return math.fsum(partial) * grid.spacing ** (2 * grid.dim)
