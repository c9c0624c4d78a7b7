"""Discrete weak form and the nonlocal Dirichlet solver.

For interior nodes ``I`` and collar nodes ``C`` the discrete operator is

    A(u)_i = 2 h^(2N) sum_{j != i} sp(u_i - u_j, p-1) K_ij  +  2 h^N F_i sp(u_i, p-1)

with ``K_ij = |x_i - x_j|^-(N+sp)``.  The last term is the interaction with
the zero exterior beyond the grid box, ``F_i`` being the exact integral of
the kernel outside the box (see :meth:`Grid.far_weights`).  ``A`` is the
gradient of

    J(u) = (1/p) [sum_{i != j} h^(2N) |u_i-u_j|^p K_ij + 2 h^N sum_i F_i |u_i|^p]
           - h^N sum_I f_i u_i - (h^N/p) sum_I c_i |u_i|^p

with respect to the interior values.  Residuals are reported per unit cell
volume, ``A(u)_i / h^N - c_i sp(u_i, p-1) - f_i``, so that tolerances do
not depend on the grid spacing.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import linalg, optimize

from .errors import CollarMismatch, NonConvex, NotConverged
from .grid import Grid, GridFunction
from .kernel import PAIR_CHUNK, FracParams, kernel_rows, signed_power

log = logging.getLogger(__name__)


def _nodal(values, pts: np.ndarray) -> np.ndarray:
    if values is None:
        return np.zeros(len(pts))
    if callable(values):
        return np.asarray(values(pts), dtype=float)
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        return np.full(len(pts), float(arr))
    if arr.shape != (len(pts),):
        raise ValueError(f"expected {len(pts)} nodal values, got shape {arr.shape}")
    return arr.copy()


@dataclass(frozen=True, eq=False)
class DirichletProblem:
    """``(-Delta_p)^s u = f + c |u|^(p-2) u`` in the domain, ``u = g`` on the collar.

    ``f`` and ``c`` hold interior values, ``g`` collar values.  Each may be
    given as a scalar, an array or a callable on points.
    """

    grid: Grid
    f: np.ndarray
    g: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        pts_i = self.grid.points[self.grid.interior]
        pts_c = self.grid.points[~self.grid.interior]
        for name, pts in (("f", pts_i), ("g", pts_c), ("c", pts_i)):
            arr = _nodal(getattr(self, name), pts)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def build(cls, grid: Grid, f=0.0, g=0.0, c=0.0) -> "DirichletProblem":
        return cls(grid, f, g, c)

    def full(self, interior_values) -> GridFunction:
        """Grid function with the given interior values and the collar datum."""
        return GridFunction.from_parts(self.grid, interior_values, self.g)

    def replace(self, **changes) -> "DirichletProblem":
        kw = dict(grid=self.grid, f=self.f, g=self.g, c=self.c)
        kw.update(changes)
        return DirichletProblem(**kw)


@dataclass(frozen=True)
class SolverOpts:
    """``grad_tol`` bounds the sup-norm of the per-cell residual; ``None``
    selects 1e-8 for p = 2 and 1e-6 otherwise."""

    grad_tol: Optional[float] = None
    max_iter: int = 10_000
    armijo: float = 1e-4
    mu: float = 1e-10
    initial: Optional[np.ndarray] = None

    def tol_for(self, params: FracParams) -> float:
        if self.grad_tol is not None:
            return float(self.grad_tol)
        return 1e-8 if params.p == 2.0 else 1e-6


# --------------------------------------------------------------------------
# pair interactions, cached per (grid, exponent, collar datum pattern)


class _Interaction:
    """Kernel blocks between interior nodes and the collar.

    Collar nodes where the datum vanishes only enter through the row sums
    ``w0``; the others are kept explicitly in ``K_IZ``.
    """

    def __init__(self, grid: Grid, exponent: float, active_collar: np.ndarray):
        pts = grid.points
        h, d = grid.spacing, grid.dim
        idx_i = grid.interior_index
        idx_c = grid.collar_index
        self.grid = grid
        self.exponent = exponent
        self.active = idx_c[active_collar]
        self.idle = idx_c[~active_collar]
        xi = pts[idx_i]
        self.K_II = kernel_rows(xi, xi, exponent)
        self.K_IZ = kernel_rows(xi, pts[self.active], exponent)
        self.w0 = _row_sums(xi, pts[self.idle], exponent)
        self.far = grid.far_weights_for(exponent)
        self.w0 = self.w0 + self.far[idx_i] / h**d
        self.scale = 2.0 * h ** (2 * d)
        self._collar_energy = {}

    def collar_energy(self, g_active: np.ndarray, p: float) -> float:
        """Energy of pairs not touching the interior, times p."""
        key = (g_active.tobytes(), p)
        if key not in self._collar_energy:
            grid = self.grid
            h, d = grid.spacing, grid.dim
            pts = grid.points
            xa = pts[self.active]
            total = []
            for start in range(0, len(xa), PAIR_CHUNK):
                sl = slice(start, start + PAIR_CHUNK)
                k_aa = kernel_rows(xa[sl], xa, self.exponent)
                rows = (np.abs(g_active[sl, None] - g_active[None, :]) ** p * k_aa).sum(axis=1)
                k_az = _row_sums(xa[sl], pts[self.idle], self.exponent)
                rows = rows + 2.0 * np.abs(g_active[sl]) ** p * k_az
                total.extend(rows.tolist())
            far = 2.0 * h**d * math.fsum((self.far[self.active] * np.abs(g_active) ** p).tolist())
            self._collar_energy[key] = math.fsum(total) * h ** (2 * d) + far
        return self._collar_energy[key]


def _row_sums(xa: np.ndarray, xb: np.ndarray, exponent: float) -> np.ndarray:
    out = np.zeros(len(xa))
    for start in range(0, len(xb), 4 * PAIR_CHUNK):
        out += kernel_rows(xa, xb[start:start + 4 * PAIR_CHUNK], exponent).sum(axis=1)
    return out


@lru_cache(maxsize=8)
def _interaction_cached(grid: Grid, exponent: float, pattern: bytes) -> _Interaction:
    active = np.frombuffer(pattern, dtype=bool)
    return _Interaction(grid, exponent, active)


def _interaction(grid: Grid, params: FracParams, g: np.ndarray) -> _Interaction:
    return _interaction_cached(grid, params.kernel_exponent, (g != 0.0).tobytes())


# --------------------------------------------------------------------------
# operator, energy, derivatives


def _apply(inter: _Interaction, uI: np.ndarray, gA: np.ndarray, q: float) -> np.ndarray:
    n = len(uI)
    out = np.empty(n)
    for start in range(0, n, PAIR_CHUNK):
        sl = slice(start, start + PAIR_CHUNK)
        ui = uI[sl, None]
        row = (signed_power(ui - uI[None, :], q) * inter.K_II[sl]).sum(axis=1)
        if gA.size:
            row = row + (signed_power(ui - gA[None, :], q) * inter.K_IZ[sl]).sum(axis=1)
        out[sl] = row
    out += inter.w0 * signed_power(uI, q)
    return inter.scale * out


def _pair_energy(inter: _Interaction, uI: np.ndarray, gA: np.ndarray, p: float) -> float:
    n = len(uI)
    rows = []
    for start in range(0, n, PAIR_CHUNK):
        sl = slice(start, start + PAIR_CHUNK)
        ui = uI[sl, None]
        row = (np.abs(ui - uI[None, :]) ** p * inter.K_II[sl]).sum(axis=1)
        if gA.size:
            row = row + 2.0 * (np.abs(ui - gA[None, :]) ** p * inter.K_IZ[sl]).sum(axis=1)
        rows.extend((row + 2.0 * inter.w0[sl] * np.abs(uI[sl]) ** p).tolist())
    return 0.5 * inter.scale * math.fsum(rows)


def _hessian(inter: _Interaction, uI, gA, params: FracParams, c, mu: float) -> np.ndarray:
    p = params.p
    h, d = inter.grid.spacing, inter.grid.dim

    def wt(t):
        if p == 2.0:
            return np.ones_like(t)
        return (t * t + mu * mu) ** (0.5 * (p - 2.0))

    H = -inter.K_II * wt(uI[:, None] - uI[None, :])
    diag = -H.sum(axis=1) + inter.w0 * wt(uI)
    if gA.size:
        diag += (inter.K_IZ * wt(uI[:, None] - gA[None, :])).sum(axis=1)
    H[np.diag_indices_from(H)] = diag
    # p < 2: the quadratic majoriser of |t|^p/p (weight |t|^(p-2)); p >= 2: Newton
    factor = max(p - 1.0, 1.0)
    H *= inter.scale * factor
    H[np.diag_indices_from(H)] -= h**d * factor * c * wt(uI)
    return H


def _split(u: GridFunction, params: FracParams):
    grid = u.grid
    gC = u.collar_values
    inter = _interaction(grid, params, gC)
    return inter, u.interior_values, u.values[inter.active]


def apply_weak_operator(u: GridFunction, params: FracParams) -> np.ndarray:
    """``A(u)`` on the interior nodes: the gradient of the pair energy."""
    inter, uI, gA = _split(u, params)
    return _apply(inter, uI, gA, params.p - 1.0)


def _check_collar(u: GridFunction, problem: DirichletProblem):
    if u.grid is not problem.grid:
        raise CollarMismatch("grid function and problem live on different grids")
    gc = u.collar_values
    if not np.allclose(gc, problem.g, rtol=1e-12, atol=1e-14):
        bad = int(np.argmax(np.abs(gc - problem.g)))
        raise CollarMismatch(f"collar node {bad}: {gc[bad]!r} != {problem.g[bad]!r}")


def _energy(inter, uI, gA, problem: DirichletProblem, params: FracParams) -> float:
    p = params.p
    hd = problem.grid.cell_volume
    pair = _pair_energy(inter, uI, gA, p) + inter.collar_energy(gA, p)
    lin = hd * math.fsum((problem.f * uI).tolist())
    zero = hd * math.fsum((problem.c * np.abs(uI) ** p).tolist()) / p
    return pair / p - lin - zero


def discrete_energy(u: GridFunction, problem: DirichletProblem, params: FracParams) -> float:
    """The convex energy ``J(u)`` whose minimiser solves the discrete problem."""
    _check_collar(u, problem)
    inter, uI, gA = _split(u, params)
    return _energy(inter, uI, gA, problem, params)


def energy_gradient(u: GridFunction, problem: DirichletProblem, params: FracParams) -> np.ndarray:
    """``dJ/du_i = A(u)_i - h^N (f_i + c_i sp(u_i, p-1))``."""
    _check_collar(u, problem)
    hd = problem.grid.cell_volume
    return apply_weak_operator(u, params) - hd * (
        problem.f + problem.c * signed_power(u.interior_values, params.p - 1.0))


def weak_residual(u: GridFunction, problem: DirichletProblem, params: FracParams) -> np.ndarray:
    """Per-cell residual ``A(u)_i / h^N - c_i sp(u_i, p-1) - f_i``.

    ``u`` may carry any collar values; the problem's collar datum is not
    imposed here."""
    hd = u.grid.cell_volume
    uI = u.interior_values
    return (apply_weak_operator(u, params) / hd
            - problem.c * signed_power(uI, params.p - 1.0) - problem.f)


def weak_supersolution_margin(u: GridFunction, problem: DirichletProblem,
                              params: FracParams) -> float:
    """``min_i`` of the residual against the nodal hat functions; nonnegative
    for a discrete supersolution."""
    return float(np.min(weak_residual(u, problem, params)))


def weak_subsolution_margin(u: GridFunction, problem: DirichletProblem,
                            params: FracParams) -> float:
    """``min_i`` of minus the residual; nonnegative for a discrete subsolution."""
    return float(np.min(-weak_residual(u, problem, params)))


# --------------------------------------------------------------------------
# solver


@dataclass(frozen=True)
class SolveInfo:
    iterations: int
    grad_norm: float
    energy: float


def _linear_guess(inter, problem, params) -> np.ndarray:
    """Minimiser of the quadratic energy with the same kernel (exact at p = 2)."""
    hd = problem.grid.cell_volume
    H = -inter.K_II.copy()
    diag = inter.K_II.sum(axis=1) + inter.w0 + inter.K_IZ.sum(axis=1)
    H[np.diag_indices_from(H)] = diag
    H *= inter.scale
    H[np.diag_indices_from(H)] -= hd * problem.c
    return H


def solve_dirichlet(problem: DirichletProblem, params: FracParams,
                    opts: Optional[SolverOpts] = None, full_output: bool = False):
    """Minimise :func:`discrete_energy` over the interior values.

    Damped Newton with Armijo backtracking.  For p < 2 the Hessian is
    regularised by ``(t^2 + mu^2)^((p-2)/2)`` and serves as a preconditioner
    only; gradient and energy are exact.  The start is the quadratic-energy
    minimiser, rescaled by a 1-D search on ``J`` when p != 2.

    Returns
    -------
    GridFunction, or ``(GridFunction, SolveInfo)`` with ``full_output``.
    """
    opts = opts or SolverOpts()
    if np.any(problem.c > 0):
        raise NonConvex(f"c > 0 at {int(np.sum(problem.c > 0))} interior nodes")
    grid = problem.grid
    hd = grid.cell_volume
    p, q = params.p, params.p - 1.0
    tol = opts.tol_for(params)
    g_full = np.zeros(grid.size)
    g_full[~grid.interior] = problem.g
    inter = _interaction(grid, params, problem.g)
    gA = g_full[inter.active]

    def energy(uI):
        return _energy(inter, uI, gA, problem, params)

    def gradient(uI):
        return _apply(inter, uI, gA, q) - hd * (problem.f + problem.c * signed_power(uI, q))

    if opts.initial is not None:
        u = np.array(opts.initial, dtype=float)
    else:
        H2 = _linear_guess(inter, problem, params)
        rhs = hd * problem.f + inter.scale * (inter.K_IZ @ gA if gA.size else 0.0)
        u = linalg.solve(H2, rhs, assume_a="pos")
        if p != 2.0 and np.any(u != 0.0):
            base = u.copy()
            res = optimize.minimize_scalar(lambda t: energy(math.exp(t) * base),
                                           bracket=(-1.0, 1.0), tol=1e-10)
            if np.isfinite(res.fun) and res.fun < energy(base):
                u = math.exp(res.x) * base

    J = energy(u)
    grad = gradient(u)
    it = 0
    while True:
        gnorm = float(np.max(np.abs(grad))) / hd if grad.size else 0.0
        if gnorm <= tol:
            break
        if it >= opts.max_iter:
            raise NotConverged(it, gnorm)
        it += 1
        H = _hessian(inter, u, gA, params, problem.c, opts.mu)
        step = _newton_step(H, grad)
        slope = float(grad @ step)
        if not slope < 0.0:
            step = -grad / np.maximum(np.diag(H), np.finfo(float).tiny)
            slope = float(grad @ step)
        t = 1.0
        while True:
            trial = u + t * step
            J_trial = energy(trial)
            if J_trial <= J + opts.armijo * t * slope:
                break
            t *= 0.5
            if t < 1e-14:
                break
        if t < 1e-14:
            # energy is flat to rounding: accept the full step if it cuts the residual
            trial = u + step
            g_trial = gradient(trial)
            if np.max(np.abs(g_trial)) < np.max(np.abs(grad)):
                u, grad, J = trial, g_trial, energy(trial)
                continue
            raise NotConverged(it, gnorm)
        u, J = trial, J_trial
        grad = gradient(u)
        log.debug("iter %d t=%.3g residual %.3e at node %d", it, t, gnorm, int(np.argmax(np.abs(grad))))

    log.debug("solve_dirichlet: %d iterations, residual %.3e", it, gnorm)
    out = problem.full(u)
    return (out, SolveInfo(it, gnorm, J)) if full_output else out


def _newton_step(H: np.ndarray, grad: np.ndarray) -> np.ndarray:
    shift = 0.0
    scale = float(np.max(np.abs(np.diag(H)))) or 1.0
    for _ in range(30):
        try:
            cf = linalg.cho_factor(H + shift * np.eye(len(H)), check_finite=False)
            return -linalg.cho_solve(cf, grad, check_finite=False)
        except linalg.LinAlgError:
            shift = max(2.0 * shift, 1e-12 * scale)
    return -grad / np.maximum(np.diag(H), np.finfo(float).tiny)
