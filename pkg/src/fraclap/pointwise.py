"""Pointwise evaluation of the fractional p-Laplacian of closed-form
functions, and the barrier arithmetic built on it.

The principal value is computed in polar coordinates about ``x``: for every
direction ``e`` the contributions of ``x + rho e`` and ``x - rho e`` are
added before integrating in ``rho``, which cancels the odd singular part of
the integrand for functions that are C^2 near ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .domains import Ball, Domain, Interval, Rectangle, as_points
from .errors import (InvalidBeta, QuadratureNotConverged, SingularPoint,
                     SupportTooClose, TailDivergent)
from .kernel import (Bounded, ClosedFormFunction, CompactSupport, FracParams,
                     PowerGrowth, signed_power, sphere_measure, tail_is_finite)
from .presets import distance_power
from .quadrature import (QuadConfig, panel_nodes, power_core, power_fit, radial_edges,
                         refine_edges)


class OpEstimate(NamedTuple):
    value: float
    error: float
    levels: int
    truncation: float


def _directions(dim: int, n_angles: int):
    """Half-circle of directions and the angular weights of the pairs."""
    if dim == 1:
        return np.array([[1.0]]), np.array([1.0])
    theta = np.pi * np.arange(n_angles) / n_angles
    dirs = np.column_stack([np.cos(theta), np.sin(theta)])
    return dirs, np.full(n_angles, np.pi / n_angles)


def _check_point(u: ClosedFormFunction, x: np.ndarray, params: FracParams):
    critical = params.sp / (params.p - 1.0) >= 1.0
    if u.smoothness == "continuous_only" and critical:
        raise SingularPoint(f"{u.name or 'function'} is only continuous and sp/(p-1) >= 1")
    if u.smoothness == "C2_except_listed_points" and len(u.singular_points):
        gap = np.linalg.norm(u.singular_points - x, axis=1)
        scale = 1.0 + np.linalg.norm(u.singular_points, axis=1)
        if np.any(gap <= 1e-12 * scale) and critical:
            raise SingularPoint(f"x={x.tolist()} is a declared non-C2 point and sp/(p-1) >= 1")


# power-growth tails are integrated out to where rho^a falls below this
POWER_TAIL_FLOOR = 1e-10
POWER_TAIL_CAP = 1e30


def _outer_radius(u: ClosedFormFunction, x: np.ndarray, quad: QuadConfig, params: FracParams):
    if isinstance(u.tail, CompactSupport):
        return float(np.linalg.norm(x)) + u.tail.radius, True
    if isinstance(u.tail, PowerGrowth):
        a = u.tail.exponent * (params.p - 1.0) - params.sp
        reach = POWER_TAIL_FLOOR ** (1.0 / a) if a < 0 else POWER_TAIL_CAP
        return float(min(max(quad.far_radius, reach), POWER_TAIL_CAP)), False
    return quad.far_radius, False


def _pv_integral(u, x, u0, params, quad, extra_breaks=()):
    """Return (value, error, levels, truncation) of the paired PV integral."""
    q = params.p - 1.0
    sp = params.sp
    dirs_all = None
    r_out, compact = _outer_radius(u, x, quad, params)
    analytic_tail = compact and quad.tail_mode == "analytic_from_tail_class"

    def one_direction(e, level):
        br = np.concatenate([u.breaks_along(x, e), u.breaks_along(x, -e),
                             np.asarray(extra_breaks, dtype=float)])
        br = br[br > 0]
        r_in = quad.pv_inner_radius
        if br.size:
            r_in = min(r_in, 0.5 * float(br.min()))
        r_top = max(r_out, 4.0 * r_in)
        edges = refine_edges(radial_edges(br, r_in, r_top, quad), level)
        rho, w = panel_nodes(edges, quad.gl_order)

        def integrand(r):
            yp = x + r[:, None] * e
            ym = x - r[:, None] * e
            pair = signed_power(u0 - u(yp), q) + signed_power(u0 - u(ym), q)
            return np.atleast_1d(pair) * r ** (-1.0 - sp)

        vals = integrand(rho)
        body = float(np.dot(w, vals))
        mag = float(np.dot(w, np.abs(vals)))
        r_min = float(edges[0])
        f1, f2, f4 = integrand(np.array([r_min, 2 * r_min, 4 * r_min]))
        core, core_err, expo = power_core(float(f1), float(f2), float(f4), r_min)
        if not np.isfinite(core):
            raise SingularPoint(f"principal value diverges at x={x.tolist()} "
                                f"(local exponent {expo:.3g})")
        tail = trunc = 0.0
        if analytic_tail:
            # u vanishes beyond r_top in every direction
            tail = 2.0 * signed_power(u0, q) * r_top ** (-sp) / sp
        elif isinstance(u.tail, Bounded):
            trunc = 2.0 * (abs(u0) + u.tail.bound) ** q * r_top ** (-sp) / sp
        elif isinstance(u.tail, PowerGrowth):
            # integrand ~ C rho^(a-1) with a = gamma (p-1) - sp < 0 beyond r_top
            g1, g2 = integrand(np.array([0.5 * r_top, r_top]))
            a_decl = u.tail.exponent * q - sp
            tail = float(g2) * r_top / -a_decl
            fit = power_fit(float(g1), float(g2), 0.5 * r_top)
            if fit is not None and fit[0] < 0:
                trunc = abs(float(g2) * r_top / -fit[0] - tail)
            else:
                trunc = abs(tail)
        return body + core + tail, mag + abs(core) + abs(tail), core_err, trunc

    prev = None
    for level in range(quad.max_levels + 1):
        n_ang = quad.n_angles * 2**level
        dirs_all, weights = _directions(params.dim, n_ang)
        total = mag = cerr = trunc = 0.0
        for e, wt in zip(dirs_all, weights):
            val, m, ce, tr = one_direction(e, level)
            total += wt * val
            mag += wt * m
            cerr += wt * ce
            trunc += wt * tr
        total *= 2.0
        mag *= 2.0
        if prev is not None:
            diff = abs(total - prev)
            if diff <= quad.rtol * mag or mag == 0.0:
                return total, diff + 2.0 * cerr, level, 2.0 * trunc
        prev = total
    raise QuadratureNotConverged(total, abs(total - prev), quad.max_levels)


def evaluate_op(u: ClosedFormFunction, x, params: FracParams,
                quad: QuadConfig | None = None) -> OpEstimate:
    """Value of ``(-Delta_p)^s u`` at the point ``x``.

    Returns an :class:`OpEstimate` whose ``error`` is the difference between
    the last two refinement levels plus the uncertainty of the power-law
    core, and whose ``truncation`` bounds the far field dropped beyond
    ``quad.far_radius`` (zero when the tail is handled analytically).
    """
    quad = quad or QuadConfig()
    if u.dim != params.dim:
        raise ValueError(f"function dimension {u.dim} != params.dim {params.dim}")
    if not tail_is_finite(u.tail, params):
        raise TailDivergent(f"{u.name or 'function'} has an infinite tail integral")
    x = as_points(x, params.dim)[0]
    _check_point(u, x, params)
    u0 = float(u(x.reshape(1, -1))[0])
    val, err, lev, trunc = _pv_integral(u, x, u0, params, quad)
    return OpEstimate(float(val), float(err), int(lev), float(trunc))


@dataclass(frozen=True, eq=False)
class GluedFunction:
    """``inner`` on the ball ``B_radius(center)``, ``outer`` elsewhere."""

    inner: ClosedFormFunction
    outer: ClosedFormFunction
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(np.atleast_1d(self.center).astype(float)))
        if not self.radius > 0:
            raise ValueError("gluing radius must be positive")

    def as_function(self) -> ClosedFormFunction:
        c = np.asarray(self.center)
        inner, outer, r = self.inner, self.outer, self.radius

        def f(pts):
            inside = np.linalg.norm(pts - c, axis=1) < r
            out = np.empty(len(pts))
            if inside.any():
                out[inside] = inner(pts[inside])
            if (~inside).any():
                out[~inside] = outer(pts[~inside])
            return out

        def breaks(x, e):
            own = Ball(tuple(c), r).ray_breaks(x, e)
            return np.concatenate([own, inner.breaks_along(x, e), outer.breaks_along(x, e)])

        return ClosedFormFunction(
            f, dim=outer.dim, smoothness="C2_except_listed_points", tail=outer.tail,
            singular_points=np.empty((0, outer.dim)), ray_breaks=breaks,
            name=f"glued({inner.name}|{outer.name})",
        )


def evaluate_glued(g: GluedFunction, x0, params: FracParams,
                   quad: QuadConfig | None = None) -> OpEstimate:
    """Operator value of the glued function at the gluing center.

    The part inside the ball is a principal value of ``g.inner``; outside
    it the integrand is regular and uses ``g.outer``.
    """
    quad = quad or QuadConfig()
    x0 = as_points(x0, params.dim)[0]
    if not np.allclose(x0, g.center, rtol=0.0, atol=1e-12):
        raise ValueError("evaluate_glued evaluates at the gluing center only")
    if not tail_is_finite(g.outer.tail, params):
        raise TailDivergent("outer function has an infinite tail integral")
    _check_point(g.inner, x0, params)
    u0 = float(g.inner(x0.reshape(1, -1))[0])
    fn = g.as_function()
    val, err, lev, trunc = _pv_integral(fn, x0, u0, params, quad, extra_breaks=[g.radius])
    return OpEstimate(float(val), float(err), int(lev), float(trunc))


def beta_threshold(params: FracParams) -> float:
    """Smallest admissible barrier exponent (exclusive)."""
    s, p = params.s, params.p
    return max(2.0, 2.0 / (2.0 - s), s * p / (p - 1.0))


def barrier_inner_term(eps: float, beta: float, r: float, params: FracParams) -> float:
    """``eps^(p-1) * int_{B_r} |y|^(beta(p-1) - N - sp) dy`` in closed form.

    The radial integral equals ``|S^{N-1}| r^a / a`` with
    ``a = beta(p-1) - sp``.
    """
    if not beta > beta_threshold(params):
        raise InvalidBeta(f"beta={beta} must exceed {beta_threshold(params):.6g}")
    if eps < 0 or r <= 0:
        raise ValueError("need eps >= 0 and r > 0")
    a = beta * (params.p - 1.0) - params.sp
    return eps ** (params.p - 1.0) * sphere_measure(params.dim) * r**a / a


# --------------------------------------------------------------------------
# jump perturbation


def support_distance(support: Domain, x: np.ndarray) -> float:
    if isinstance(support, Interval):
        t = float(x[0])
        return max(support.a - t, t - support.b, 0.0)
    if isinstance(support, Ball):
        return max(float(np.linalg.norm(x - np.asarray(support.center))) - support.radius, 0.0)
    lo, hi = support.bbox
    return float(np.linalg.norm(np.maximum(np.maximum(lo - x, x - hi), 0.0)))


def _support_rule(support: Domain, u: ClosedFormFunction, level: int, order: int):
    """Nodes and weights of a composite rule on the support."""
    n = 16 * 2**level
    if isinstance(support, Interval) or (isinstance(support, Ball) and support.dim == 1):
        lo, hi = support.bbox
        cuts = u.singular_points[:, 0] if u.dim == 1 else np.empty(0)
        cuts = cuts[(cuts > lo[0]) & (cuts < hi[0])]
        edges = np.unique(np.concatenate([np.linspace(lo[0], hi[0], n + 1), cuts]))
        t, w = panel_nodes(edges, order)
        return t.reshape(-1, 1), w
    if isinstance(support, Ball):
        c = np.asarray(support.center)
        rho, wr = panel_nodes(np.linspace(0.0, support.radius, n + 1), order)
        m = 2 * n
        theta = 2.0 * np.pi * np.arange(m) / m
        R, T = np.meshgrid(rho, theta, indexing="ij")
        pts = c + np.column_stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()])
        w = (wr[:, None] * rho[:, None] * np.full(m, 2.0 * np.pi / m)[None, :]).ravel()
        return pts, w
    if isinstance(support, Rectangle):
        lo, hi = support.bbox
        tx, wx = panel_nodes(np.linspace(lo[0], hi[0], n + 1), order)
        ty, wy = panel_nodes(np.linspace(lo[1], hi[1], n + 1), order)
        X, Y = np.meshgrid(tx, ty, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()]), np.outer(wx, wy).ravel()
    raise TypeError(f"unsupported support {type(support).__name__}")


def jump_perturbation_h(u: ClosedFormFunction, v_support: Domain, v_value: float, x,
                        params: FracParams, quad: QuadConfig | None = None) -> float:
    """Change of the operator at ``x`` caused by adding ``v_value`` times the
    indicator of ``v_support`` to ``u``, for ``x`` away from the support."""
    quad = quad or QuadConfig()
    x = as_points(x, params.dim)[0]
    if support_distance(v_support, x) < quad.pv_inner_radius:
        raise SupportTooClose(f"dist(x, supp v) < {quad.pv_inner_radius}")
    if v_value == 0.0:
        return 0.0
    q = params.p - 1.0
    ux = float(u(x.reshape(1, -1))[0])
    prev = None
    for level in range(quad.max_levels + 1):
        pts, w = _support_rule(v_support, u, level, quad.gl_order)
        d = ux - u(pts)
        k = np.linalg.norm(pts - x, axis=1) ** (-params.kernel_exponent)
        vals = (signed_power(d - v_value, q) - signed_power(d, q)) * k
        total = 2.0 * float(np.dot(w, vals))
        if prev is not None and abs(total - prev) <= quad.rtol * abs(total):
            return total
        prev = total
    raise QuadratureNotConverged(total, abs(total - prev), quad.max_levels)


# --------------------------------------------------------------------------
# boundary strip scan


@dataclass
class ScanResult:
    points: np.ndarray
    delta: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    max_abs: float
    median_abs: float
    bounded: bool


def strip_samples(domain: Domain, strip_width: float, n_samples: int) -> np.ndarray:
    """Deterministic points with ``0 < delta < strip_width`` kept at distance
    at least ``strip_width / 10`` from the ridge of ``delta``."""
    depths_all = np.geomspace(strip_width * 1e-3, strip_width * 0.9, max(n_samples, 2))
    if domain.dim == 1:
        lo, hi = domain.bbox
        pts = []
        for k, d in enumerate(depths_all[:n_samples]):
            pts.append(lo[0] + d if k % 2 == 0 else hi[0] - d)
        pts = np.array(pts).reshape(-1, 1)
    elif isinstance(domain, Ball):
        c = np.asarray(domain.center)
        k = np.arange(n_samples)
        theta = 2.0 * np.pi * ((k * 0.6180339887498949) % 1.0)
        d = depths_all[np.argsort((k * 0.7548776662466927) % 1.0)][:n_samples]
        r = domain.radius - d
        pts = c + np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    else:
        lo, hi = domain.bbox
        k = np.arange(n_samples)
        side = k % 4
        frac = 0.2 + 0.6 * ((k * 0.6180339887498949) % 1.0)
        d = depths_all[:n_samples]
        xs = np.where(side < 2, lo[0] + frac * (hi[0] - lo[0]),
                      np.where(side == 2, lo[0] + d, hi[0] - d))
        ys = np.where(side == 0, lo[1] + d,
                      np.where(side == 1, hi[1] - d, lo[1] + frac * (hi[1] - lo[1])))
        pts = np.column_stack([xs, ys])
    keep = domain.ridge_gap(pts) >= strip_width / 10.0
    return pts[keep]


def delta_s_boundedness_scan(domain: Domain, strip_width: float, n_samples: int,
                             params: FracParams, quad: QuadConfig | None = None) -> ScanResult:
    """Evaluate the operator on ``delta^s`` at points of the boundary strip."""
    if not strip_width < domain.inradius:
        raise ValueError("strip_width must be smaller than the inradius")
    quad = quad or QuadConfig()
    u = distance_power(domain, params.s)
    pts = strip_samples(domain, strip_width, n_samples)
    vals, errs = [], []
    for x in pts:
        est = evaluate_op(u, x, params, quad)
        vals.append(est.value)
        errs.append(est.error)
    vals, errs = np.array(vals), np.array(errs)
    absv = np.abs(vals)
    med = float(np.median(absv))
    mx = float(absv.max())
    return ScanResult(pts, domain.distance(pts), vals, errs, mx, med, bool(mx <= 10.0 * med))
