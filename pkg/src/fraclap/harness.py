"""Numerical checks of comparison, minimum-principle, Hopf, logarithmic and
barrier statements on computed or constructed grid functions.

Every check returns a :class:`VerificationReport`.  Hypotheses that can be
measured are measured; when one fails the check raises
:class:`~fraclap.errors.PreconditionViolated`, unless called with
``require_preconditions=False``, in which case the failure is recorded and
the status can no longer be ``pass``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domains import Domain, Interval, as_points
from .errors import (AlphaSearchFailed, InsufficientPoints, InvalidBeta,
                     PreconditionViolated, RayExitsGrid)
from .grid import FLOAT_FMT, GridFunction
from .kernel import FracParams, kernel_rows
from .pointwise import (barrier_inner_term, beta_threshold, delta_s_boundedness_scan,
                        jump_perturbation_h)
from .presets import distance_power, interval_as_ball
from .quadrature import QuadConfig
from .solver import (DirichletProblem, discrete_energy, weak_subsolution_margin,
                     weak_supersolution_margin)

STATUSES = ("pass", "fail", "inconclusive")
# relative tolerance on weak-residual margins, in units of max(1, |f|, |g|)
MARGIN_TOL = 1e-6


@dataclass
class VerificationReport:
    check_name: str
    status: str
    measured: dict
    tolerance: float
    narrative: str = ""
    table: Optional[list] = field(default=None, repr=False)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}")

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def csv_lines(self) -> list:
        """Header plus one ``check_name,status,tolerance,key,value`` row per quantity."""
        lines = ["check_name,status,tolerance,key,value"]
        for k, v in self.measured.items():
            lines.append(f"{self.check_name},{self.status},{FLOAT_FMT % self.tolerance},"
                         f"{k},{_fmt(v)}")
        return lines

    def table_lines(self) -> list:
        if not self.table:
            return []
        keys = list(self.table[0])
        return [",".join(keys)] + [",".join(_fmt(row[k]) for k in keys) for row in self.table]

    def summary(self) -> str:
        head = f"[{self.status.upper():>12}] {self.check_name} (tol {self.tolerance:.3g})"
        body = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return "\n".join(x for x in (head, "  " + body, "  " + self.narrative) if x.strip())


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % float(v)
    return str(v)


def _scale(*arrays) -> float:
    return max([1.0] + [float(np.max(np.abs(a))) for a in arrays if np.size(a)])


def _hypotheses(failures: list, require: bool, check: str):
    if failures and require:
        name, detail = failures[0]
        raise PreconditionViolated(name, f"{check}: {detail}")


def sign_split_c(c) -> np.ndarray:
    """Negative part ``min(0, c)`` of a zero-order coefficient."""
    return np.minimum(np.asarray(c, dtype=float), 0.0)


# --------------------------------------------------------------------------
# comparison


def check_comparison(u: GridFunction, v: GridFunction, problem: DirichletProblem,
                     params: FracParams, *, variant: str = "bounded",
                     tol: Optional[float] = None, tol_cmp: Optional[float] = None,
                     require_preconditions: bool = True) -> VerificationReport:
    """``u`` a supersolution, ``v`` a subsolution, ``u >= v`` on the collar
    => ``u >= v`` in the domain.

    ``variant="nonnegative"`` adds the hypotheses ``c <= 0`` and
    ``u, v >= 0`` of the version with a zero-order term.
    """
    if variant not in ("bounded", "nonnegative"):
        raise ValueError("variant must be 'bounded' or 'nonnegative'")
    base = _scale(problem.f, problem.g)
    tol = MARGIN_TOL * base if tol is None else tol
    tol_cmp = 1e-6 * _scale(u.values, v.values) if tol_cmp is None else tol_cmp
    sup_margin = weak_supersolution_margin(u, problem, params)
    sub_margin = weak_subsolution_margin(v, problem, params)
    collar_gap = float(np.min(u.collar_values - v.collar_values))
    failures = []
    if sup_margin < -tol:
        failures.append(("u supersolution", f"margin {sup_margin:.3e} < -{tol:.1e}"))
    if sub_margin < -tol:
        failures.append(("v subsolution", f"margin {sub_margin:.3e} < -{tol:.1e}"))
    if collar_gap < -tol_cmp:
        failures.append(("u >= v on collar", f"min gap {collar_gap:.3e}"))
    if variant == "nonnegative":
        if np.any(problem.c > 0):
            failures.append(("c <= 0", f"max c = {problem.c.max():.3e}"))
        if min(u.values.min(), v.values.min()) < -tol_cmp:
            failures.append(("u, v >= 0", "negative values"))
    _hypotheses(failures, require_preconditions, "comparison")

    gap = float(np.min(u.interior_values - v.interior_values))
    holds = gap >= -tol_cmp
    status = "fail" if not holds else ("inconclusive" if failures else "pass")
    narrative = "; ".join(f"hypothesis '{n}' fails: {d}" for n, d in failures)
    measured = dict(min_gap=gap, sup_margin=sup_margin, sub_margin=sub_margin,
                    collar_gap=collar_gap, hypotheses_ok=not failures)
    return VerificationReport("comparison", status, measured, tol_cmp, narrative)


# --------------------------------------------------------------------------
# strong minimum principle


def check_min_principle(u: GridFunction, problem: DirichletProblem, params: FracParams, *,
                        tol: Optional[float] = None, pos_tol: Optional[float] = None,
                        require_preconditions: bool = True) -> VerificationReport:
    """Dichotomy for nonnegative supersolutions of ``(-Delta_p)^s u = f + c |u|^(p-2) u``
    with ``f >= 0``: strictly positive inside or identically zero.

    A sign-indefinite ``c`` is replaced by ``min(0, c)`` when ``u >= 0``
    everywhere, which keeps ``u`` a supersolution.
    """
    scale = _scale(problem.f, problem.g)
    tol = MARGIN_TOL * scale if tol is None else tol
    pos_tol = 1e-10 * scale if pos_tol is None else pos_tol
    notes = []
    if np.any(problem.c > 0):
        if np.all(u.values >= 0):
            problem = problem.replace(c=sign_split_c(problem.c))
            notes.append("c replaced by min(0, c)")
        elif require_preconditions:
            raise PreconditionViolated("c <= 0", "c > 0 somewhere and u changes sign")
    margin = weak_supersolution_margin(u, problem, params)
    failures = []
    if margin < -tol:
        failures.append(("u supersolution", f"margin {margin:.3e} < -{tol:.1e}"))
    if np.any(problem.c > 0):
        failures.append(("c <= 0", "positive coefficient"))
    if np.any(problem.f < 0):
        # a negative source lets any nonnegative profile pass the margin test
        failures.append(("f >= 0", f"min f = {problem.f.min():.3e}"))
    if np.any(u.collar_values < 0):
        failures.append(("u >= 0 on collar", f"min {u.collar_values.min():.3e}"))
    _hypotheses(failures, require_preconditions, "min_principle")

    uI = u.interior_values
    u_min = float(uI.min())
    u_abs = float(np.max(np.abs(u.values)))
    if u_min > pos_tol:
        outcome = "strictly_positive"
    elif u_abs < pos_tol:
        outcome = "identically_zero"
    else:
        outcome = "violation"
    status = "fail" if outcome == "violation" else ("inconclusive" if failures else "pass")
    notes += [f"hypothesis '{n}' fails: {d}" for n, d in failures]
    measured = dict(outcome=outcome, min_interior=u_min, max_abs=u_abs, margin=margin,
                    nonnegative_interior=bool(u_min >= -pos_tol), hypotheses_ok=not failures)
    return VerificationReport("min_principle", status, measured, pos_tol, "; ".join(notes))


# --------------------------------------------------------------------------
# Hopf ratio


def hopf_ratio_profile(u: GridFunction, ball: Domain, ray_directions: Sequence,
                       n_points: int, params: FracParams, *,
                       floor_factor: float = 0.1) -> VerificationReport:
    """Tabulate ``u / delta_ball^s`` along rays from the ball centre toward
    the boundary.

    Depths run geometrically from ``R/2`` (the mid-ray reference) down to
    the grid spacing.  The check passes when, on every ray, the minimum over
    the last quarter of the samples is at least ``floor_factor`` times the
    mid-ray ratio.
    """
    ball = interval_as_ball(ball) if isinstance(ball, Interval) else ball
    if n_points < 4:
        raise ValueError("need n_points >= 4")
    c = np.asarray(ball.center, dtype=float)
    R = ball.radius
    h = u.grid.spacing
    depths = np.geomspace(0.5 * R, h, n_points)
    rows = []
    worst = math.inf
    mid_ratios, tail_mins = [], []
    for k, e in enumerate(ray_directions):
        e = np.atleast_1d(np.asarray(e, dtype=float))
        e = e / np.linalg.norm(e)
        pts = c + (R - depths)[:, None] * e[None, :]
        vals = u.interpolate(pts)
        if np.any(np.isnan(vals)):
            raise RayExitsGrid(f"ray {k} leaves the grid")
        ratio = vals / depths**params.s
        tail = ratio[-max(1, n_points // 4):]
        mid_ratios.append(float(ratio[0]))
        tail_mins.append(float(tail.min()))
        rel = tail.min() / ratio[0] if ratio[0] > 0 else -math.inf
        worst = min(worst, rel)
        rows += [dict(ray=k, delta=d, ratio=r) for d, r in zip(depths, ratio)]
    status = "pass" if worst >= floor_factor else "fail"
    measured = dict(min_relative_tail=worst, min_tail_ratio=min(tail_mins),
                    min_mid_ratio=min(mid_ratios), rays=len(mid_ratios))
    return VerificationReport("hopf", status, measured, floor_factor,
                              "tail minimum relative to mid-ray ratio", rows)


# --------------------------------------------------------------------------
# logarithmic estimate


def _in_ball(pts, x0, r):
    return np.linalg.norm(pts - x0, axis=1) < r


def log_lemma_terms(u: GridFunction, x0, r: float, h: float, c, params: FracParams) -> dict:
    """Discrete terms of the logarithmic estimate on ``B_r(x0)``.

    ``c`` holds interior nodal values (or ``None`` for zero).
    """
    grid = u.grid
    x0 = as_points(x0, grid.dim)[0]
    pts, vals = grid.points, u.values
    hd = grid.cell_volume
    p, sp, d = params.p, params.sp, grid.dim
    inner = _in_ball(pts, x0, r)
    xb, ub = pts[inner], vals[inner]
    logs = np.log((ub + h))
    K = kernel_rows(xb, xb, params.kernel_exponent)
    lhs = float(np.sum(np.abs(logs[:, None] - logs[None, :]) ** p * K)) * hd * hd

    outer = ~_in_ball(pts, x0, 2.0 * r)
    neg = np.maximum(-vals[outer], 0.0)
    dist = np.linalg.norm(pts[outer] - x0, axis=1)
    tail = float(np.sum(neg ** (p - 1.0) / dist**params.kernel_exponent)) * hd
    bracket = h ** (1.0 - p) * r**sp * tail + 1.0

    cI = np.zeros(int(grid.interior.sum())) if c is None else np.asarray(c, dtype=float)
    near = _in_ball(pts[grid.interior], x0, 2.0 * r)
    c_term = float(np.sum(np.abs(cI[near]))) * hd
    c_min = (lhs - c_term) / (r ** (d - sp) * bracket)
    return dict(lhs=lhs, tail=tail, bracket=bracket, c_term=c_term, c_min=c_min,
                nodes=int(inner.sum()))


def check_log_lemma(u: GridFunction, x0, R: float, r: float, h=(0.5, 0.1, 0.01), c=None,
                    params: Optional[FracParams] = None, *,
                    r_factors: Sequence[float] = (1.0, 0.5, 0.25),
                    spread: float = 10.0,
                    require_preconditions: bool = True) -> VerificationReport:
    """Empirical constant of the logarithmic estimate over a sweep of radii
    ``r * r_factors`` and shifts ``h``.

    Passes when, along every radius sweep at fixed ``h`` and every shift
    sweep at fixed ``r``, the largest ``C_min`` is at most ``spread`` times
    the median of that sweep.
    """
    if params is None:
        raise ValueError("params is required")
    grid = u.grid
    x0 = as_points(x0, grid.dim)[0]
    shifts = np.atleast_1d(np.asarray(h, dtype=float))
    failures = []
    if grid.domain is not None and not float(grid.domain.distance(x0[None, :])[0]) > R:
        failures.append(("B_R(x0) inside domain", f"dist(x0) <= R = {R}"))
    if not r * max(r_factors) <= 0.5 * R:
        failures.append(("B_r inside B_(R/2)", f"r = {r}, R = {R}"))
    if np.any((shifts <= 0) | (shifts >= 1)):
        failures.append(("0 < h < 1", f"h = {shifts.tolist()}"))
    if np.any(u.values[_in_ball(grid.points, x0, R)] < 0):
        failures.append(("u >= 0 on B_R", "negative nodal value"))
    _hypotheses(failures, require_preconditions, "log_lemma")

    rows = []
    for f in r_factors:
        for hh in shifts:
            t = log_lemma_terms(u, x0, r * f, float(hh), c, params)
            if t["nodes"] < 2:
                raise InsufficientPoints(f"B_{r * f:g}(x0) holds {t['nodes']} nodes")
            rows.append(dict(r=r * f, h=float(hh), **t))
    cm = np.array([row["c_min"] for row in rows]).reshape(len(r_factors), len(shifts))
    # stability along each parameter with the other held fixed
    slices = [cm[:, j] for j in range(cm.shape[1])] + [cm[i, :] for i in range(cm.shape[0])]
    ratios = [_spread(sl) for sl in slices]
    worst = max(ratios)
    bounded = worst <= spread
    status = "fail" if not bounded else ("inconclusive" if failures else "pass")
    measured = dict(c_min_max=float(cm.max()), c_min_median=float(np.median(cm)),
                    c_min_min=float(cm.min()), r_spread=max(ratios[:cm.shape[1]]),
                    h_spread=max(ratios[cm.shape[1]:]), grid_spread=_spread(cm.ravel()),
                    max_tail=max(row["tail"] for row in rows))
    narrative = "; ".join(f"hypothesis '{n}' fails: {d}" for n, d in failures)
    return VerificationReport("log_lemma", status, measured, spread, narrative, rows)


def _spread(values) -> float:
    """``max / median``; 0 when every value vanishes, inf for a zero median."""
    values = np.asarray(values, dtype=float)
    med, mx = float(np.median(values)), float(values.max())
    if mx <= 0.0:
        return 0.0
    return mx / med if med > 0 else math.inf


# --------------------------------------------------------------------------
# Hopf barrier


@dataclass
class BarrierRecord:
    alpha: float
    eps: float
    f_estimate: float
    rhs_floor: float
    inf_u: float
    alphas: list
    h_values: np.ndarray  # (len(alphas), n_samples)
    samples: np.ndarray


def construct_hopf_barrier(ball: Domain, K_ball: Domain, u: GridFunction, c, rho: float,
                           params: FracParams, quad: Optional[QuadConfig] = None, *,
                           n_samples: int = 12, max_doublings: int = 60):
    """Build ``w = delta^s + alpha chi_K`` below ``u`` near the boundary.

    ``alpha`` doubles from 1 until ``f + h_alpha`` is below
    ``inf c u^(p-1)`` on the sampled strip ``{delta < rho}``, where ``f``
    is the sampled operator of ``delta^s`` (max plus one standard deviation)
    and ``h_alpha`` the effect of the jump on ``K``.  Then
    ``eps = inf{u : delta >= rho} / (2 (R^s + alpha))`` and
    ``v = eps w <= u`` is checked on the strip nodes.

    Returns
    -------
    (BarrierRecord, VerificationReport)
    """
    quad = quad or QuadConfig()
    b = interval_as_ball(ball) if isinstance(ball, Interval) else ball
    Kb = interval_as_ball(K_ball) if isinstance(K_ball, Interval) else K_ball
    grid = u.grid
    s, q = params.s, params.p - 1.0
    delta = b.distance(grid.points)
    inside = delta > 0
    core = inside & (delta >= rho)
    strip = inside & (delta < rho)
    k_reach = np.linalg.norm(np.asarray(Kb.center) - np.asarray(b.center)) + Kb.radius
    if not k_reach < b.radius - rho:
        raise PreconditionViolated("K inside {delta >= rho}", f"K reaches {k_reach:.3g}")
    if not np.any(core) or float(u.values[core].min()) <= 0:
        raise PreconditionViolated("u > 0 on {delta >= rho}", "nonpositive value")
    cI = np.zeros(int(grid.interior.sum())) if c is None else np.asarray(c, dtype=float)
    if np.any(cI > 0):
        raise PreconditionViolated("c <= 0", f"max c = {cI.max():.3e}")
    inf_u = float(u.values[core].min())

    c_full = np.zeros(grid.size)
    c_full[grid.interior] = cI
    strip_vals = u.values[strip]
    rhs_floor = float(np.min(c_full[strip] * np.sign(strip_vals) * np.abs(strip_vals) ** q))

    scan = delta_s_boundedness_scan(b, rho, n_samples, params, quad)
    f_est = float(scan.values.max() + scan.values.std())
    w = distance_power(b, s)
    samples = scan.points
    alphas, hs = [], []
    alpha = 1.0
    for _ in range(max_doublings):
        hv = np.array([jump_perturbation_h(w, Kb, alpha, x, params, quad) for x in samples])
        alphas.append(alpha)
        hs.append(hv)
        if float(np.max(f_est + hv)) <= rhs_floor:
            break
        alpha *= 2.0
    else:
        raise AlphaSearchFailed(f"no alpha up to {alpha:g} satisfies the strip inequality")
    # one more doubling so that monotonicity is observed on at least two values
    hs.append(np.array([jump_perturbation_h(w, Kb, 2.0 * alpha, x, params, quad)
                        for x in samples]))
    H = np.array(hs)
    monotone = bool(np.all(np.diff(H, axis=0) < 0))

    eps = 0.5 * inf_u / (b.radius**s + alpha)
    in_K = np.linalg.norm(grid.points - np.asarray(Kb.center), axis=1) <= Kb.radius
    v = eps * (delta**s + alpha * in_K)
    gap = float(np.min(u.values[strip] - v[strip])) if np.any(strip) else math.inf
    status = "pass" if (monotone and gap >= 0) else "fail"
    record = BarrierRecord(alpha, eps, f_est, rhs_floor, inf_u,
                           alphas + [2.0 * alpha], H, samples)
    measured = dict(alpha=alpha, eps=eps, f_estimate=f_est, rhs_floor=rhs_floor,
                    inf_u=inf_u, strip_gap=gap, h_monotone=monotone, doublings=len(alphas))
    rows = [dict(alpha=a, sample=i, h=float(hv)) for a, row in zip(record.alphas, H)
            for i, hv in enumerate(row)]
    return record, VerificationReport("barrier", status, measured, 0.0,
                                      "v = eps (delta^s + alpha chi_K) against u on the strip",
                                      rows)


# --------------------------------------------------------------------------
# touching test


def viscosity_touch_test(u: GridFunction, x_star, eps: float, beta: float, r: float,
                         params: FracParams, quad: Optional[QuadConfig] = None, *,
                         eps_sweep: Sequence[float] = (1.0, 0.1, 0.01, 0.001),
                         interp_tol: Optional[float] = None,
                         zero_tol: Optional[float] = None) -> VerificationReport:
    """Barrier arithmetic at a point where a nonnegative ``u`` vanishes.

    ``T1`` is the closed-form inner integral of ``eps |x - x_star|^beta``;
    ``T2`` the discrete exterior integral of ``u^(p-1) / |y - x_star|^(N+sp)``
    over ``|y - x_star| >= r``.  For ``u`` not identically zero the sweep must
    show ``T1`` decreasing to below a positive ``T2``; for ``u = 0``,
    ``T2`` must vanish.
    """
    grid = u.grid
    xs = as_points(x_star, grid.dim)[0]
    scale = _scale(u.values)
    interp_tol = 1e-8 * scale if interp_tol is None else interp_tol
    zero_tol = 1e-12 * scale if zero_tol is None else zero_tol
    if u.values.min() < -zero_tol:
        raise PreconditionViolated("u >= 0", f"min u = {u.values.min():.3e}")
    u_star = float(u.interpolate(xs[None, :])[0])
    if not abs(u_star) <= interp_tol:
        raise PreconditionViolated("u(x_star) = 0", f"u(x_star) = {u_star:.3e}")
    try:
        T1 = barrier_inner_term(eps, beta, r, params)
        sweep = [barrier_inner_term(e, beta, r, params) for e in eps_sweep]
    except InvalidBeta as exc:
        raise PreconditionViolated("beta above threshold", str(exc)) from exc

    dist = np.linalg.norm(grid.points - xs, axis=1)
    far = dist >= r
    vals = np.maximum(u.values[far], 0.0)
    T2 = float(np.sum(vals ** (params.p - 1.0) / dist[far] ** params.kernel_exponent)) \
        * grid.cell_volume
    nonzero = float(np.max(np.abs(u.values))) > zero_tol
    if nonzero:
        ok = T2 > 0 and bool(np.all(np.diff(sweep) < 0)) and sweep[-1] < T2
        branch = "nonzero"
    else:
        ok = T2 == 0.0
        branch = "zero"
    measured = dict(T1=T1, T2=T2, branch=branch, T1_smallest_eps=sweep[-1],
                    beta_threshold=beta_threshold(params))
    rows = [dict(eps=e, T1=t, T2=T2) for e, t in zip(eps_sweep, sweep)]
    return VerificationReport("viscosity", "pass" if ok else "fail", measured, 0.0,
                              f"{branch} branch", rows)


# --------------------------------------------------------------------------
# boundary exponent


def estimate_holder_exponent(u: GridFunction, domain: Domain, band: float, s: float, *,
                             tol: float = 0.1, min_points: int = 10) -> VerificationReport:
    """Least-squares slope of ``log u`` against ``log delta`` for nodes with
    ``h < delta < band``; passes when it is within ``tol`` of ``s``."""
    grid = u.grid
    delta = domain.distance(grid.points)
    h = grid.spacing
    sel = grid.interior & (delta > h * (1.0 + 1e-9)) & (delta < band) & (u.values > 0)
    n = int(sel.sum())
    if n < min_points:
        raise InsufficientPoints(f"{n} nodes with h < delta < {band} (need {min_points})")
    X = np.log(delta[sel])
    Y = np.log(u.values[sel])
    A = np.column_stack([X, np.ones_like(X)])
    coef, res, *_ = np.linalg.lstsq(A, Y, rcond=None)
    slope = float(coef[0])
    resid = float(np.sqrt(np.mean((A @ coef - Y) ** 2)))
    status = "pass" if abs(slope - s) <= tol else "fail"
    measured = dict(alpha_hat=slope, s=s, deviation=slope - s, fit_rms=resid, nodes=n)
    return VerificationReport("holder", status, measured, tol,
                              f"fit window h < delta < {band:g}")


# --------------------------------------------------------------------------
# energy minimality


def check_energy_minimality(u: GridFunction, problem: DirichletProblem, params: FracParams,
                            seed: int, n_trials: int = 20,
                            amplitude: float = 1e-3) -> VerificationReport:
    """``J(u) <= J(u + w)`` for random interior perturbations ``w``."""
    rng = np.random.default_rng(seed)
    J0 = discrete_energy(u, problem, params)
    scale = amplitude * _scale(u.values)
    worst = math.inf
    for _ in range(n_trials):
        w = rng.standard_normal(int(problem.grid.interior.sum())) * scale
        J = discrete_energy(problem.full(u.interior_values + w), problem, params)
        worst = min(worst, J - J0)
    tol = 1e-12 * max(1.0, abs(J0))
    status = "pass" if worst >= -tol else "fail"
    return VerificationReport("energy_minimality", status,
                              dict(energy=J0, min_increase=worst, trials=n_trials), tol,
                              f"seed {seed}")
