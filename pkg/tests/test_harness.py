from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclap.domains import Ball, Interval
from fraclap.errors import (AlphaSearchFailed, InsufficientPoints, PreconditionViolated,
                            RayExitsGrid)
from fraclap.grid import Grid, GridFunction
from fraclap.harness import (VerificationReport, check_comparison, check_energy_minimality,
                             check_log_lemma, check_min_principle, construct_hopf_barrier,
                             estimate_holder_exponent, hopf_ratio_profile, log_lemma_terms,
                             sign_split_c, viscosity_touch_test)
from fraclap.kernel import FracParams
from fraclap.presets import indicator
from fraclap.solver import DirichletProblem, solve_dirichlet

from oracles import dense_p2_solve

DOMAIN = Interval(-1.0, 1.0)
P2 = FracParams(0.5, 2.0)


@lru_cache(maxsize=None)
def grid_1d(nodes=201):
    return Grid.build(DOMAIN, nodes)


@lru_cache(maxsize=None)
def solved(s=0.5, p=2.0, f=1.0, g=0.0, c=0.0, nodes=201):
    problem = DirichletProblem.build(grid_1d(nodes), f=f, g=g, c=c)
    return solve_dirichlet(problem, FracParams(s, p)), problem


def delta_power(grid, exponent, lam=1.0, domain=DOMAIN):
    return GridFunction(grid, lam * domain.distance(grid.points) ** exponent)


# -- reports -----------------------------------------------------------------------


def test_report_serialisation():
    rep = VerificationReport("demo", "pass", dict(a=1.5, n=3, ok=True, tag="x"), 1e-6, "note")
    lines = rep.csv_lines()
    assert lines[0] == "check_name,status,tolerance,key,value"
    assert lines[1] == "demo,pass,9.9999999999999995e-07,a,1.5000000000000000e+00"
    assert lines[2].endswith("n,3") and lines[3].endswith("ok,true")
    assert "PASS" in rep.summary() and rep.passed
    with pytest.raises(ValueError):
        VerificationReport("demo", "maybe", {}, 0.0)


# -- sign split ---------------------------------------------------------------------


def test_sign_split_examples():
    assert np.array_equal(sign_split_c(np.full(3, -1.0)), np.full(3, -1.0))
    assert np.array_equal(sign_split_c(np.full(3, 1.0)), np.zeros(3))
    assert np.array_equal(sign_split_c([-1.0, 2.0, 0.0]), [-1.0, 0.0, 0.0])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30))
def test_sign_split_idempotent(c):
    once = sign_split_c(c)
    assert np.array_equal(sign_split_c(once), once)
    assert np.all(once <= 0) and np.all(once <= np.asarray(c))


# -- comparison ---------------------------------------------------------------------


def test_comparison_reflexive():
    u, problem = solved()
    rep = check_comparison(u, u, problem, P2)
    assert rep.passed and rep.measured["min_gap"] == 0.0


def test_comparison_source_order():
    u, problem = solved(f=1.0)
    v, _ = solved(f=0.0)
    rep = check_comparison(u, v, problem, P2)
    assert rep.passed and rep.measured["min_gap"] > 0
    # both sides agree with the dense linear solve
    _, _, _, ref = dense_p2_solve(-1.0, 1.0, 201, 0.5, 1.0)
    assert np.max(np.abs(u.values - ref)) < 1e-8 and np.all(v.values == 0)


def test_comparison_collar_order():
    u, problem = solved(f=0.0, g=1.0)
    v, _ = solved(f=0.0, g=0.0)
    rep = check_comparison(u, v, problem, P2)
    assert rep.passed and rep.measured["collar_gap"] == 1.0


def test_comparison_swapped_fails():
    u, problem = solved(f=1.0)
    v, _ = solved(f=0.0)
    with pytest.raises(PreconditionViolated) as exc:
        check_comparison(v, u, problem, P2)
    assert exc.value.hypothesis == "u supersolution"
    rep = check_comparison(v, u, problem, P2, require_preconditions=False)
    assert rep.status == "fail" and not rep.measured["hypotheses_ok"]


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_comparison_nonlinear(p):
    u, problem = solved(p=p, f=1.0, c=-1.0)
    v, _ = solved(p=p, f=0.5, c=-1.0)
    rep = check_comparison(u, v, problem, FracParams(0.5, p), variant="nonnegative")
    assert rep.passed


def test_comparison_rejects_positive_c():
    u, problem = solved()
    with pytest.raises(PreconditionViolated):
        check_comparison(u, u, problem.replace(c=0.5), P2, variant="nonnegative")


# -- minimum principle ----------------------------------------------------------------


def test_min_principle_zero():
    u, problem = solved(f=0.0)
    rep = check_min_principle(u, problem, P2)
    assert rep.passed and rep.measured["outcome"] == "identically_zero"


def test_min_principle_exterior_patch():
    grid = grid_1d(101)
    patch = indicator([1.5], 0.25)
    problem = DirichletProblem.build(grid, g=patch)
    for p in (1.5, 2.0, 3.0):
        params = FracParams(0.5, p)
        u = solve_dirichlet(problem, params)
        rep = check_min_principle(u, problem, params)
        assert rep.passed and rep.measured["outcome"] == "strictly_positive"
        assert rep.measured["nonnegative_interior"]


def test_min_principle_patch_against_dense_solve():
    from oracles import uniform_grid_1d
    from scipy import linalg
    grid = grid_1d(101)
    problem = DirichletProblem.build(grid, g=indicator([1.5], 0.25))
    u = solve_dirichlet(problem, P2)
    x, interior, h = uniform_grid_1d(-1.0, 1.0, 101)
    g = np.where(np.abs(x - 1.5) <= 0.25, 1.0, 0.0) * ~interior
    idx = np.flatnonzero(interior)
    from oracles import far_weight_1d
    F = far_weight_1d(x, h, 0.5, 2.0)
    L = np.zeros((len(idx), len(idx)))
    rhs = np.zeros(len(idx))
    for r, i in enumerate(idx):
        d = np.abs(x[i] - x)
        d[i] = np.inf
        k = d**-2.0
        L[r, r] = 2 * h * h * k.sum() + 2 * h * F[i]
        L[r, :] -= 2 * h * h * k[idx] * (np.arange(len(idx)) != r)
        rhs[r] = 2 * h * h * np.dot(k, g)
    ref = linalg.solve(L, rhs)
    assert np.allclose(u.interior_values, ref, rtol=1e-8, atol=1e-12)


def test_min_principle_has_teeth():
    grid = grid_1d(101)
    vals = np.maximum(DOMAIN.distance(grid.points), 0.0)
    vals[grid.interior_index[10]] = 0.0
    u = GridFunction(grid, vals)
    problem = DirichletProblem.build(grid)
    with pytest.raises(PreconditionViolated):
        check_min_principle(u, problem, P2)
    rep = check_min_principle(u, problem, P2, require_preconditions=False)
    assert rep.status == "fail" and rep.measured["outcome"] == "violation"
    # a source chosen to make the margin vanish is negative, which is reported
    from fraclap.solver import weak_residual
    forced = problem.replace(f=weak_residual(u, problem, P2))
    assert abs(check_min_principle(u, forced, P2, require_preconditions=False)
               .measured["margin"]) < 1e-12
    with pytest.raises(PreconditionViolated) as exc:
        check_min_principle(u, forced, P2)
    assert exc.value.hypothesis == "f >= 0"


def test_min_principle_sign_indefinite_c():
    # u solves f = 1, c = -1; with f = 1/2 it stays a supersolution for a small c > 0
    u, problem = solved(p=3.0, f=1.0, c=-1.0)
    x = grid_1d().points[grid_1d().interior, 0]
    mixed = problem.replace(f=0.5, c=np.where(x > 0, 0.1, -1.0))
    rep = check_min_principle(u, mixed, FracParams(0.5, 3.0))
    assert rep.passed and "min(0, c)" in rep.narrative
    assert rep.measured["margin"] > 0


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e-9, 1e-9), st.floats(0, 1e-9))
def test_min_principle_outcomes_exclusive(low, spread):
    grid = Grid.from_nodes([[0.0], [1.0], [2.0], [3.0]], [False, True, True, False], 1.0)
    u = GridFunction(grid, [0.0, low, low + spread, 0.0])
    rep = check_min_principle(u, DirichletProblem.build(grid), P2, require_preconditions=False)
    out = rep.measured["outcome"]
    assert out in ("strictly_positive", "identically_zero", "violation")
    assert not (rep.measured["min_interior"] > rep.tolerance
                and rep.measured["max_abs"] < rep.tolerance)


# -- Hopf ratio -----------------------------------------------------------------------


def test_hopf_exact_profile():
    grid = grid_1d()
    rep = hopf_ratio_profile(delta_power(grid, 0.5), DOMAIN, [[1.0], [-1.0]], 16, P2)
    ratios = np.array([row["ratio"] for row in rep.table])
    assert rep.passed
    # exact at the nodes; linear interpolation in between costs a few percent
    assert np.all(np.abs(ratios - 1.0) < 0.05)


@pytest.mark.parametrize("lam", [0.1, 2.0, 7.5])
def test_hopf_homogeneous(lam):
    grid = grid_1d()
    base = hopf_ratio_profile(delta_power(grid, 0.5), DOMAIN, [[1.0], [-1.0]], 16, P2)
    scaled = hopf_ratio_profile(delta_power(grid, 0.5, lam), DOMAIN, [[1.0], [-1.0]], 16, P2)
    a = np.array([row["ratio"] for row in base.table])
    b = np.array([row["ratio"] for row in scaled.table])
    assert np.allclose(b, lam * a, rtol=1e-14)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_hopf_solver_output(p):
    u, _ = solved(p=p)
    rep = hopf_ratio_profile(u, DOMAIN, [[1.0], [-1.0]], 16, FracParams(0.5, p))
    assert rep.passed and rep.measured["min_tail_ratio"] > 0


def test_hopf_negative_control():
    # the decay of delta^s only shows below the floor on a fine grid
    grid = Grid.build(DOMAIN, 20001, collar_factor=1.0)
    rep = hopf_ratio_profile(delta_power(grid, 1.0), DOMAIN, [[1.0], [-1.0]], 16, P2)
    assert rep.status == "fail" and rep.measured["min_relative_tail"] < 0.1


def test_hopf_ray_leaves_grid():
    grid = grid_1d(21)
    with pytest.raises(RayExitsGrid):
        hopf_ratio_profile(delta_power(grid, 0.5), Ball((0.0,), 10.0), [[1.0]], 8, P2)


def test_hopf_2d():
    ball = Ball((0.0, 0.0), 1.0)
    grid = Grid.build(ball, 21, collar_factor=1.0)
    u = solve_dirichlet(DirichletProblem.build(grid, f=1.0), FracParams(0.5, 2.0, 2))
    dirs = [[np.cos(t), np.sin(t)] for t in np.linspace(0, 2 * np.pi, 8, endpoint=False)]
    rep = hopf_ratio_profile(u, ball, dirs, 8, FracParams(0.5, 2.0, 2))
    assert rep.measured["rays"] == 8 and rep.measured["min_tail_ratio"] > 0


# -- logarithmic estimate -----------------------------------------------------------


def test_log_lemma_constant():
    grid = grid_1d()
    u = GridFunction.from_function(grid, 0.7)
    rep = check_log_lemma(u, [0.3], 0.6, 0.15, params=P2)
    assert rep.passed and rep.measured["c_min_max"] == 0.0


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_log_lemma_solver_output(p):
    u, _ = solved(p=p)
    rep = check_log_lemma(u, [0.3], 0.6, 0.15, params=FracParams(0.5, p))
    assert rep.passed, rep.summary()
    assert np.isfinite(rep.measured["c_min_max"]) and rep.measured["c_min_min"] > 0


def test_log_lemma_nonnegative_tail_zero():
    u, _ = solved()
    assert np.all(u.values >= 0)
    rep = check_log_lemma(u, [0.3], 0.6, 0.15, params=P2)
    assert rep.measured["max_tail"] == 0.0


def test_log_lemma_scale_invariant():
    u, _ = solved()
    a = log_lemma_terms(u, [0.3], 0.15, 0.1, None, P2)
    b = log_lemma_terms(u.with_values(10.0 * u.values), [0.3], 0.15, 1.0, None, P2)
    assert b["lhs"] == pytest.approx(a["lhs"], rel=1e-12)


def test_log_lemma_tail_of_negative_part():
    u, _ = solved()
    vals = u.values.copy()
    vals[u.grid.points[:, 0] > 1.5] = -1.0
    t = log_lemma_terms(u.with_values(vals), [0.3], 0.15, 0.1, None, P2)
    assert t["tail"] > 0 and t["bracket"] > 1


def test_log_lemma_preconditions():
    u, _ = solved()
    with pytest.raises(PreconditionViolated):
        check_log_lemma(u, [0.3], 0.6, 0.4, params=P2)
    with pytest.raises(PreconditionViolated):
        check_log_lemma(u, [0.3], 0.9, 0.15, params=P2)
    with pytest.raises(PreconditionViolated):
        check_log_lemma(u, [0.3], 0.6, 0.15, h=(1.5,), params=P2)
    rep = check_log_lemma(u, [0.3], 0.9, 0.15, params=P2, require_preconditions=False)
    assert rep.status in ("inconclusive", "fail")


# -- Hopf barrier ---------------------------------------------------------------------


def test_barrier_on_scaled_profile():
    grid = grid_1d()
    u = delta_power(grid, 0.5, 2.0)
    record, rep = construct_hopf_barrier(DOMAIN, Ball((0.0,), 0.2), u, None, 0.2, P2)
    assert rep.passed
    assert record.eps <= 2.0 and rep.measured["strip_gap"] >= 0
    assert np.all(np.diff(record.h_values, axis=0) < 0)


def test_barrier_solver_output():
    u, _ = solved()
    record, rep = construct_hopf_barrier(DOMAIN, Ball((0.0,), 0.12), u, None, 0.12, P2)
    assert rep.passed, rep.summary()
    assert record.alphas == [2.0**k for k in range(len(record.alphas))]


def test_barrier_alpha_search_fails():
    u, _ = solved()
    with pytest.raises(AlphaSearchFailed):
        construct_hopf_barrier(DOMAIN, Ball((0.0,), 0.12), u, np.full(201, -50.0), 0.12, P2,
                               max_doublings=2)


def test_barrier_preconditions():
    u, _ = solved()
    with pytest.raises(PreconditionViolated):
        construct_hopf_barrier(DOMAIN, Ball((0.0,), 0.9), u, None, 0.2, P2)
    with pytest.raises(PreconditionViolated):
        construct_hopf_barrier(DOMAIN, Ball((0.0,), 0.1), u, np.full(201, 1.0), 0.2, P2)


# -- touching test --------------------------------------------------------------------


def test_touch_zero_branch():
    grid = grid_1d()
    rep = viscosity_touch_test(GridFunction.from_function(grid, 0.0), [0.0], 0.1, 3.0, 0.25, P2)
    assert rep.passed and rep.measured["T2"] == 0.0 and rep.measured["branch"] == "zero"


def test_touch_ramp():
    grid = grid_1d()
    x = grid.points[:, 0]
    u = GridFunction(grid, np.maximum(np.abs(x) - 0.5, 0.0))
    rep = viscosity_touch_test(u, [0.0], 0.001, 3.0, 0.25, P2)
    assert rep.measured["T1"] == pytest.approx(6.25e-5, rel=1e-13)
    # brute-force exterior sum
    h = grid.spacing
    T2 = 0.0
    for xi, ui in zip(x, u.values):
        if abs(xi) >= 0.25:
            T2 += ui / abs(xi) ** 2 * h
    assert rep.measured["T2"] == pytest.approx(T2, rel=1e-12)
    assert rep.passed and rep.measured["T1"] < rep.measured["T2"]


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-4, 10.0), st.floats(1.2, 4.0), st.floats(0.1, 0.9))
def test_touch_eps_scaling(eps, p, s):
    grid = grid_1d(21)
    u = GridFunction.from_function(grid, 0.0)
    beta = 4.0 / (2.0 - s) + 2.0 + s * p / (p - 1.0)
    params = FracParams(s, p)
    a = viscosity_touch_test(u, [0.0], eps, beta, 0.25, params).measured["T1"]
    b = viscosity_touch_test(u, [0.0], 0.5 * eps, beta, 0.25, params).measured["T1"]
    assert b == pytest.approx(0.5 ** (p - 1.0) * a, rel=1e-13)


def test_touch_quarters_at_p3():
    grid = grid_1d(21)
    u = GridFunction.from_function(grid, 0.0)
    params = FracParams(0.5, 3.0)
    a = viscosity_touch_test(u, [0.0], 0.2, 3.0, 0.25, params).measured["T1"]
    b = viscosity_touch_test(u, [0.0], 0.1, 3.0, 0.25, params).measured["T1"]
    assert b == pytest.approx(a / 4.0, rel=1e-14)


def test_touch_preconditions():
    u, _ = solved()
    with pytest.raises(PreconditionViolated):
        viscosity_touch_test(u, [0.0], 0.1, 3.0, 0.25, P2)
    grid = grid_1d()
    z = GridFunction.from_function(grid, 0.0)
    with pytest.raises(PreconditionViolated):
        viscosity_touch_test(z, [0.0], 0.1, 1.5, 0.25, P2)
    with pytest.raises(PreconditionViolated):
        viscosity_touch_test(z.with_values(-np.ones(grid.size)), [0.0], 0.1, 3.0, 0.25, P2)


# -- boundary exponent ----------------------------------------------------------------


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_holder_exact_power(s):
    grid = grid_1d()
    rep = estimate_holder_exponent(delta_power(grid, s), DOMAIN, 0.1, s)
    assert abs(rep.measured["alpha_hat"] - s) < 1e-3 and rep.passed


def test_holder_lipschitz_control():
    grid = grid_1d()
    rep = estimate_holder_exponent(delta_power(grid, 1.0), DOMAIN, 0.1, 0.5)
    assert rep.measured["alpha_hat"] == pytest.approx(1.0, abs=1e-9) and rep.status == "fail"


def test_holder_solver_output():
    u, _ = solved()
    rep = estimate_holder_exponent(u, DOMAIN, 0.1, 0.5)
    assert 0.4 <= rep.measured["alpha_hat"] <= 0.6 and rep.passed


def test_holder_insufficient_points():
    u, _ = solved(nodes=21)
    with pytest.raises(InsufficientPoints):
        estimate_holder_exponent(u, DOMAIN, 0.1, 0.5)


# -- energy minimality ------------------------------------------------------------


def test_energy_minimality_pass_and_fail():
    u, problem = solved(p=3.0)
    params = FracParams(0.5, 3.0)
    assert check_energy_minimality(u, problem, params, seed=1).passed
    shifted = problem.full(u.interior_values * 1.5)
    assert check_energy_minimality(shifted, problem, params, seed=1, amplitude=1e-6).status == "fail"
