"""Named closed-form functions used by the CLI and the test-suite."""
from __future__ import annotations

import math

import numpy as np

from .domains import Ball, Domain, Interval
from .kernel import (Bounded, ClosedFormFunction, CompactSupport, FracParams,
                     PowerGrowth)


def _circle_breaks(center, radius):
    c = np.asarray(center, dtype=float)

    def breaks(x, e):
        return Ball(tuple(c), radius).ray_breaks(x, e)

    return breaks


def constant(value: float, dim: int = 1) -> ClosedFormFunction:
    value = float(value)
    return ClosedFormFunction(
        lambda pts: np.full(len(pts), value), dim=dim,
        tail=Bounded(abs(value)), singular_points=np.empty((0, dim)),
        name=f"constant({value:g})",
    )


def indicator(center, radius: float, value: float = 1.0) -> ClosedFormFunction:
    """``value`` on the closed ball ``B_radius(center)``, zero elsewhere."""
    c = np.atleast_1d(np.asarray(center, dtype=float))
    dim = c.size
    value = float(value)

    def f(pts):
        return np.where(np.linalg.norm(pts - c, axis=1) <= radius, value, 0.0)

    sing = np.array([[c[0] - radius], [c[0] + radius]]) if dim == 1 else np.empty((0, 2))
    return ClosedFormFunction(
        f, dim=dim, smoothness="C2_except_listed_points",
        tail=CompactSupport(float(np.linalg.norm(c)) + radius),
        singular_points=sing, ray_breaks=_circle_breaks(c, radius),
        name=f"indicator({c.tolist()}, {radius:g})",
    )


def distance_power(domain: Domain, exponent: float, scale: float = 1.0) -> ClosedFormFunction:
    """``scale * dist(x, domain^c) ** exponent``."""
    lo, hi = domain.bbox
    reach = float(max(np.linalg.norm(lo), np.linalg.norm(hi)))

    def f(pts):
        return scale * domain.distance(pts) ** exponent

    return ClosedFormFunction(
        f, dim=domain.dim, smoothness="C2_except_listed_points",
        tail=CompactSupport(reach), singular_points=domain.singular_points,
        ray_breaks=domain.ray_breaks, name=f"delta^{exponent:g}",
    )


def bump(exponent: float, center=None, radius: float = 1.0, dim: int = 1) -> ClosedFormFunction:
    """``(radius^2 - |x - center|^2)_+ ** exponent``."""
    c = np.zeros(dim) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    dim = c.size

    def f(pts):
        r2 = np.einsum("ij,ij->i", pts - c, pts - c)
        return np.maximum(radius**2 - r2, 0.0) ** exponent

    sing = np.array([[c[0] - radius], [c[0] + radius]]) if dim == 1 else np.empty((0, 2))
    return ClosedFormFunction(
        f, dim=dim, smoothness="C2_except_listed_points",
        tail=CompactSupport(float(np.linalg.norm(c)) + radius),
        singular_points=sing, ray_breaks=_circle_breaks(c, radius),
        name=f"bump^{exponent:g}",
    )


def barrier(eps: float, beta: float, x_star) -> ClosedFormFunction:
    """The touching test function ``-eps * |x - x_star| ** beta``."""
    xs = np.atleast_1d(np.asarray(x_star, dtype=float))

    def f(pts):
        return -eps * np.linalg.norm(pts - xs, axis=1) ** beta

    return ClosedFormFunction(
        f, dim=xs.size, tail=PowerGrowth(beta), singular_points=np.empty((0, xs.size)),
        name=f"barrier(eps={eps:g}, beta={beta:g})",
    )


def ramp(offset: float, dim: int = 1) -> ClosedFormFunction:
    """``max(0, |x| - offset)``."""

    def f(pts):
        return np.maximum(np.linalg.norm(pts, axis=1) - offset, 0.0)

    sing = np.array([[-offset], [offset]]) if dim == 1 else np.empty((0, 2))
    return ClosedFormFunction(
        f, dim=dim, smoothness="C2_except_listed_points", tail=PowerGrowth(1.0),
        singular_points=sing, ray_breaks=_circle_breaks(np.zeros(dim), offset),
        name=f"ramp({offset:g})",
    )


def odd_gaussian(dim: int = 1) -> ClosedFormFunction:
    """``x_1 * exp(-|x|^2)``, odd about the origin."""

    def f(pts):
        return pts[:, 0] * np.exp(-np.einsum("ij,ij->i", pts, pts))

    return ClosedFormFunction(f, dim=dim, tail=Bounded(1.0 / math.sqrt(2.0 * math.e)),
                              singular_points=np.empty((0, dim)), name="odd_gaussian")


def half_line_power(exponent: float) -> ClosedFormFunction:
    """``(x)_+ ** exponent`` on the line."""

    def f(pts):
        return np.maximum(pts[:, 0], 0.0) ** exponent

    return ClosedFormFunction(f, dim=1, smoothness="C2_except_listed_points",
                              tail=PowerGrowth(exponent), singular_points=np.array([[0.0]]),
                              name=f"x_+^{exponent:g}")


# --------------------------------------------------------------------------
# registry: name -> builder(params, domain, **options)


def _p_constant(params, domain, value=0.0):
    return constant(value, params.dim)


def _p_indicator(params, domain, center, radius, value=1.0):
    return indicator(center, radius, value)


def _p_delta_power(params, domain, exponent, scale=1.0):
    return distance_power(domain, exponent, scale)


def _p_delta_s(params, domain, scale=1.0):
    return distance_power(domain, params.s, scale)


def _p_delta_2s(params, domain, scale=1.0):
    return distance_power(domain, 2.0 * params.s, scale)


def _p_bump(params, domain, exponent=None, center=None, radius=1.0):
    return bump(params.s if exponent is None else exponent, center, radius, params.dim)


def _p_barrier(params, domain, eps, beta, x_star):
    return barrier(eps, beta, x_star)


def _p_ramp(params, domain, offset=0.5):
    return ramp(offset, params.dim)


def _p_odd_gaussian(params, domain):
    return odd_gaussian(params.dim)


PRESETS = {
    "constant": _p_constant,
    "indicator": _p_indicator,
    "delta_power": _p_delta_power,
    "delta_s": _p_delta_s,
    "delta_2s": _p_delta_2s,
    "bump": _p_bump,
    "barrier": _p_barrier,
    "ramp": _p_ramp,
    "odd_gaussian": _p_odd_gaussian,
}


def build_preset(spec, params: FracParams, domain: Domain) -> ClosedFormFunction:
    """Build a function from ``{"preset": name, **options}`` or a number."""
    if isinstance(spec, (int, float)):
        return constant(float(spec), params.dim)
    spec = dict(spec)
    name = spec.pop("preset", None)
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    return PRESETS[name](params, domain, **spec)


def interval_as_ball(domain: Domain) -> Ball:
    """View a 1D interval (or a ball) as a :class:`Ball`."""
    if isinstance(domain, Ball):
        return domain
    if isinstance(domain, Interval):
        return Ball((float(domain.center[0]),), domain.inradius)
    raise TypeError(f"{type(domain).__name__} is not a ball")
