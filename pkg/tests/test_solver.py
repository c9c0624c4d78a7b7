import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclap.domains import Ball, Interval
from fraclap.errors import CollarMismatch, NonConvex, NotConverged
from fraclap.grid import Grid, GridFunction, read_csv, read_meta, write_csv
from fraclap.kernel import FracParams, gagliardo_seminorm, signed_power
from fraclap.solver import (DirichletProblem, SolverOpts, apply_weak_operator, discrete_energy,
                            energy_gradient, solve_dirichlet, weak_residual,
                            weak_subsolution_margin, weak_supersolution_margin)

from oracles import brute_energy, brute_operator, dense_p2_solve, far_weight_1d

GRID_1D = Grid.build(Interval(-1.0, 1.0), 21, collar_factor=1.0)
GRID_2D = Grid.build(Ball((0.0, 0.0), 1.0), 9, collar_factor=1.0)
P_VALUES = [1.5, 2.0, 3.0]


def _random_u(grid, seed, collar=False):
    rng = np.random.default_rng(seed)
    vals = rng.uniform(-1.0, 1.0, grid.size)
    if not collar:
        vals[~grid.interior] = 0.0
    return GridFunction(grid, vals)


def _fd_gradient(fun, x, step=1e-6):
    out = np.empty_like(x)
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = step
        out[k] = (fun(x + e) - fun(x - e)) / (2 * step)
    return out


# -- the weak operator ------------------------------------------------------------


@pytest.mark.parametrize("dom", [Interval(-1.0, 1.0), Ball((0.0, 0.0), 1.0)], ids=["1d", "2d"])
@pytest.mark.parametrize("p", P_VALUES)
def test_operator_constant(dom, p):
    # without the far field the grid is the whole space, so constants are exact
    grid = Grid.build(dom, 9, collar_factor=1.0, far_field=False)
    assert np.all(apply_weak_operator(GridFunction.from_function(grid, 2.5),
                                      FracParams(0.5, p, grid.dim)) == 0.0)


def test_operator_constant_sees_zero_exterior():
    params = FracParams(0.5, 2.0)
    a = apply_weak_operator(GridFunction.from_function(GRID_1D, 2.5), params)
    far = GRID_1D.far_weights(params)[GRID_1D.interior]
    assert np.allclose(a, 2 * GRID_1D.spacing * far * 2.5, rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 0.9), st.floats(1.1, 4.0))
def test_operator_odd(seed, s, p):
    u = _random_u(GRID_1D, seed, collar=True)
    params = FracParams(s, p)
    a = apply_weak_operator(u, params)
    b = apply_weak_operator(u.with_values(-u.values), params)
    assert np.array_equal(b, -a)


@pytest.mark.parametrize("p", P_VALUES)
def test_operator_three_nodes_finite_difference(p):
    h = 0.1
    grid = Grid.from_nodes([[0.0], [h], [2 * h]], [False, True, False], h)
    params = FracParams(0.5, p)
    problem = DirichletProblem.build(grid)
    u = problem.full([1.0])

    def energy(v):
        return discrete_energy(problem.full(v), problem, params)

    fd = _fd_gradient(energy, np.array([1.0]), 1e-7)
    a = apply_weak_operator(u, params)
    # hand enumeration: pairs (1,0) and (1,2), both at distance h
    hand = 2 * h**2 * 2 * 1.0 / h ** (1 + 0.5 * p)
    assert a[0] == pytest.approx(hand, rel=1e-14)
    assert a[0] == pytest.approx(fd[0], rel=1e-6)


@pytest.mark.parametrize("p", P_VALUES)
def test_operator_matches_brute_force(p):
    params = FracParams(0.4, p)
    u = _random_u(GRID_1D, 7, collar=True)
    far = GRID_1D.far_weights(params)
    a = apply_weak_operator(u, params)
    idx = GRID_1D.interior_index
    x = GRID_1D.points[:, 0]
    ref = [brute_operator(x, GRID_1D.spacing, u.values, 0.4, p, i, far) for i in idx]
    assert np.allclose(a, ref, rtol=1e-12, atol=1e-14)


def test_far_weights_closed_form():
    params = FracParams(0.3, 2.5)
    x = GRID_1D.points[:, 0]
    assert np.allclose(GRID_1D.far_weights(params), far_weight_1d(x, GRID_1D.spacing, 0.3, 2.5),
                       rtol=1e-13)


def test_far_weights_2d_against_radial_quadrature():
    from scipy import integrate
    params = FracParams(0.5, 2.0, 2)
    grid = GRID_2D
    lo, hi = grid.box
    i = grid.interior_index[len(grid.interior_index) // 3]
    x0 = grid.points[i]
    a = params.sp

    def exit_radius(t):
        e = np.array([np.cos(t), np.sin(t)])
        r = np.inf
        for k in range(2):
            if e[k] > 0:
                r = min(r, (hi[k] - x0[k]) / e[k])
            elif e[k] < 0:
                r = min(r, (lo[k] - x0[k]) / e[k])
        return r

    ref, _ = integrate.quad(lambda t: exit_radius(t) ** (-a) / a, 0, 2 * np.pi, limit=400,
                            points=[np.arctan2(c[1] - x0[1], c[0] - x0[0]) % (2 * np.pi)
                                    for c in ((lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]),
                                              (lo[0], hi[1]))])
    assert grid.far_weights(params)[i] == pytest.approx(ref, rel=1e-5)


@pytest.mark.parametrize("grid", [GRID_1D, GRID_2D], ids=["1d", "2d"])
@pytest.mark.parametrize("p", P_VALUES)
def test_operator_is_energy_gradient(grid, p):
    params = FracParams(0.5, p, grid.dim)
    problem = DirichletProblem.build(grid)
    rng = np.random.default_rng(11)
    for trial in range(10):
        uI = rng.uniform(-1, 1, len(grid.interior_index))
        fd = _fd_gradient(lambda v: discrete_energy(problem.full(v), problem, params), uI)
        a = apply_weak_operator(problem.full(uI), params)
        assert np.linalg.norm(a - fd) <= 1e-5 * np.linalg.norm(a)


# -- energy -------------------------------------------------------------------------


def test_energy_zero():
    problem = DirichletProblem.build(GRID_1D)
    u = GridFunction.from_function(GRID_1D, 0.0)
    assert discrete_energy(u, problem, FracParams(0.5, 2.0)) == 0.0


@pytest.mark.parametrize("p", P_VALUES)
def test_energy_matches_brute_force(p):
    params = FracParams(0.3, p)
    x = GRID_1D.points[:, 0]
    f = np.linspace(-1, 1, len(GRID_1D.interior_index))
    problem = DirichletProblem.build(GRID_1D, f=f, c=-0.5)
    u = _random_u(GRID_1D, 3)
    ref = brute_energy(x, GRID_1D.interior, GRID_1D.spacing, u.values, 0.3, p, f, -0.5,
                       GRID_1D.far_weights(params))
    assert discrete_energy(u, problem, params) == pytest.approx(ref, rel=1e-12)


def test_energy_collar_term_and_seminorm():
    # with a zero source the energy is the seminorm plus the far field, over p
    params = FracParams(0.5, 2.0)
    grid = Grid.build(Interval(-1.0, 1.0), 21, collar_factor=1.0, far_field=False)
    problem = DirichletProblem.build(grid)
    u = _random_u(grid, 5)
    assert discrete_energy(u, problem, params) == pytest.approx(
        gagliardo_seminorm(u, params) / 2.0, rel=1e-12)


@pytest.mark.parametrize("p", P_VALUES)
def test_energy_gradient_finite_difference(p):
    params = FracParams(0.6, p)
    problem = DirichletProblem.build(GRID_1D, f=0.7, c=-1.0, g=0.3)
    rng = np.random.default_rng(2)
    uI = rng.uniform(-1, 1, len(GRID_1D.interior_index))
    u = problem.full(uI)
    grad = energy_gradient(u, problem, params)
    fd = _fd_gradient(lambda v: discrete_energy(problem.full(v), problem, params), uI)
    assert np.allclose(grad, fd, rtol=1e-6, atol=1e-9)
    hd = GRID_1D.cell_volume
    expected = apply_weak_operator(u, params) - hd * (0.7 - signed_power(uI, p - 1.0))
    assert np.allclose(grad, expected, rtol=1e-13, atol=1e-15)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 0.9), st.floats(1.1, 4.0),
       st.floats(-2.0, 0.0))
def test_energy_strictly_convex(seed, s, p, c):
    params = FracParams(s, p)
    problem = DirichletProblem.build(GRID_1D, f=1.0, c=c, g=0.2)
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, len(GRID_1D.interior_index))
    b = rng.uniform(-1, 1, len(GRID_1D.interior_index))
    J = [discrete_energy(problem.full(v), problem, params) for v in (a, b, 0.5 * (a + b))]
    assert J[2] < 0.5 * (J[0] + J[1])


def test_collar_mismatch():
    problem = DirichletProblem.build(GRID_1D, g=1.0)
    with pytest.raises(CollarMismatch):
        discrete_energy(GridFunction.from_function(GRID_1D, 0.0), problem, FracParams(0.5, 2.0))
    other = Grid.build(Interval(-1.0, 1.0), 21, collar_factor=1.0)
    with pytest.raises(CollarMismatch):
        discrete_energy(GridFunction.from_function(other, 1.0), problem, FracParams(0.5, 2.0))


# -- solver ------------------------------------------------------------------------


@pytest.mark.parametrize("p", P_VALUES)
def test_solve_zero(p):
    u = solve_dirichlet(DirichletProblem.build(GRID_1D), FracParams(0.5, p))
    assert np.all(u.values == 0.0)


@pytest.mark.parametrize("p", P_VALUES)
def test_solve_constant_collar(p):
    grid = Grid.build(Interval(-1.0, 1.0), 21, far_field=False)
    u = solve_dirichlet(DirichletProblem.build(grid, g=1.0), FracParams(0.5, p))
    assert np.allclose(u.values, 1.0, atol=1e-9)


def test_solve_matches_dense_linear_solve():
    grid = Grid.build(Interval(-1.0, 1.0))
    params = FracParams(0.5, 2.0)
    u, info = solve_dirichlet(DirichletProblem.build(grid, f=1.0), params, full_output=True)
    x, interior, h, ref = dense_p2_solve(-1.0, 1.0, 201, 0.5, 1.0)
    assert np.allclose(grid.points[:, 0], x, rtol=0, atol=1e-13)
    assert np.max(np.abs(u.values - ref)) <= 1e-8
    assert info.grad_norm <= 1e-8


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_solve_nonlinear_residual(p):
    params = FracParams(0.5, p)
    problem = DirichletProblem.build(GRID_1D, f=1.0, c=-0.5)
    u, info = solve_dirichlet(problem, params, full_output=True)
    assert np.max(np.abs(weak_residual(u, problem, params))) <= 1e-6
    assert abs(weak_supersolution_margin(u, problem, params)) <= 1e-6
    assert abs(weak_subsolution_margin(u, problem, params)) <= 1e-6
    assert info.iterations > 0


def test_solve_2d_ball():
    params = FracParams(0.5, 2.0, 2)
    problem = DirichletProblem.build(GRID_2D, f=1.0)
    u = solve_dirichlet(problem, params)
    assert np.all(u.interior_values > 0)
    centre = int(np.argmin(np.linalg.norm(GRID_2D.points, axis=1)))
    assert u.values[centre] == pytest.approx(np.max(u.values))


@pytest.mark.parametrize("p", P_VALUES)
def test_solve_minimises_energy(p):
    params = FracParams(0.5, p)
    problem = DirichletProblem.build(GRID_1D, f=1.0)
    u = solve_dirichlet(problem, params)
    J = discrete_energy(u, problem, params)
    rng = np.random.default_rng(0)
    for _ in range(20):
        pert = u.interior_values + 1e-3 * rng.standard_normal(len(GRID_1D.interior_index))
        assert discrete_energy(problem.full(pert), problem, params) >= J


@pytest.mark.parametrize("p", P_VALUES)
def test_solve_independent_of_start(p):
    params = FracParams(0.5, p)
    problem = DirichletProblem.build(GRID_1D, f=1.0, c=-0.3)
    opts = SolverOpts()
    a = solve_dirichlet(problem, params, opts)
    start = np.random.default_rng(4).uniform(0, 2, len(GRID_1D.interior_index))
    b = solve_dirichlet(problem, params, SolverOpts(initial=start))
    assert np.max(np.abs(a.values - b.values)) <= 10 * opts.tol_for(params)


def test_solve_refinement():
    params = FracParams(0.5, 2.0)
    mids = []
    for n in (51, 101, 201):
        grid = Grid.build(Interval(-1.0, 1.0), n)
        u = solve_dirichlet(DirichletProblem.build(grid, f=1.0), params)
        mids.append(float(u.interpolate([[0.0]])[0]))
    for a, b in zip(mids, mids[1:]):
        assert abs(b - a) < 0.05 * abs(b)


def test_solve_deterministic():
    params = FracParams(0.5, 1.5)
    problem = DirichletProblem.build(GRID_1D, f=1.0)
    a = solve_dirichlet(problem, params)
    b = solve_dirichlet(problem, params)
    assert np.array_equal(a.values, b.values)


def test_nonconvex_rejected():
    with pytest.raises(NonConvex):
        solve_dirichlet(DirichletProblem.build(GRID_1D, c=0.1), FracParams(0.5, 2.0))


def test_not_converged():
    problem = DirichletProblem.build(GRID_1D, f=1.0)
    with pytest.raises(NotConverged) as exc:
        solve_dirichlet(problem, FracParams(0.5, 3.0), SolverOpts(max_iter=1))
    assert exc.value.iterations == 1 and exc.value.final_grad_norm > 0


# -- margins -------------------------------------------------------------------------


def test_margin_zero_function():
    f = -np.linspace(0.5, 1.5, len(GRID_1D.interior_index))
    problem = DirichletProblem.build(GRID_1D, f=f)
    u = GridFunction.from_function(GRID_1D, 0.0)
    assert weak_supersolution_margin(u, problem, FracParams(0.5, 2.0)) == pytest.approx(0.5)


def test_margin_five_nodes():
    h = 0.25
    x = h * np.arange(5)
    interior = np.array([False, True, True, True, False])
    grid = Grid.from_nodes(x.reshape(-1, 1), interior, h)
    problem = DirichletProblem.build(grid)
    params = FracParams(0.5, 2.0)
    vals = np.zeros(5)
    vals[2] = 1.0
    u = GridFunction(grid, vals)
    res = weak_residual(u, problem, params)
    ref = np.array([brute_operator(x, h, vals, 0.5, 2.0, i) / h for i in (1, 2, 3)])
    assert np.allclose(res, ref, rtol=1e-14)
    # the raised node pushes up, its neighbours are pulled down
    assert res[1] > 0 and res[0] < 0 and res[2] < 0
    assert weak_supersolution_margin(u, problem, params) == pytest.approx(ref.min())
    assert weak_subsolution_margin(u, problem, params) == pytest.approx(-ref.max())


# -- serialisation -----------------------------------------------------------------


@pytest.mark.parametrize("grid", [GRID_1D, GRID_2D], ids=["1d", "2d"])
def test_csv_round_trip(grid, tmp_path):
    u = _random_u(grid, 9, collar=True)
    path = write_csv(u, tmp_path / "u.csv", FracParams(0.5, 2.0, grid.dim))
    back = read_csv(path)
    assert np.array_equal(back.values, u.values)
    assert np.array_equal(back.grid.points, grid.points)
    assert np.array_equal(back.grid.interior, grid.interior)
    assert back.grid.spacing == grid.spacing
    head = path.read_text().splitlines()[0]
    assert head == ("x,value,mask" if grid.dim == 1 else "x,y,value,mask")
    meta = read_meta(path)
    assert meta["s"] == "0.5" and meta["p"] == "2.0"


def test_grid_invariants():
    grid = Grid.build(Interval(-1.0, 1.0), 21)
    assert grid.collar_radius >= 2.0 * 2.0 - 1e-12
    assert np.all(grid.delta[grid.interior] > 0) and np.all(grid.delta[~grid.interior] == 0)
    lo, hi = grid.box
    assert lo[0] <= -1.0 - grid.collar_radius + 1e-9 and hi[0] >= 1.0 + grid.collar_radius - 1e-9
    with pytest.raises(ValueError):
        Grid.build(Interval(-1.0, 1.0), 21, collar_factor=0.5)
    with pytest.raises(ValueError):
        GridFunction(grid, np.full(grid.size, np.nan))
