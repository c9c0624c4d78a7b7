"""Fractional p-Laplacian: pointwise evaluation, a nonlocal Dirichlet solver
and numerical checks of comparison, minimum-principle and Hopf-type
statements."""
from .domains import Ball, Interval, Rectangle, domain_from_spec
from .errors import FracLapError
from .grid import Grid, GridFunction, read_csv, write_csv
from .harness import (VerificationReport, check_comparison, check_energy_minimality,
                      check_log_lemma, check_min_principle, construct_hopf_barrier,
                      estimate_holder_exponent, hopf_ratio_profile, log_lemma_terms,
                      sign_split_c, viscosity_touch_test)
from .kernel import (Bounded, ClosedFormFunction, CompactSupport, FracParams, PowerGrowth,
                     gagliardo_seminorm, signed_power, tail_norm)
from .pointwise import (GluedFunction, barrier_inner_term, delta_s_boundedness_scan,
                        evaluate_glued, evaluate_op, jump_perturbation_h)
from .quadrature import QuadConfig
from .solver import (DirichletProblem, SolverOpts, apply_weak_operator, discrete_energy,
                     solve_dirichlet, weak_residual, weak_subsolution_margin,
                     weak_supersolution_margin)

__all__ = [
    "Ball",
    "Bounded",
    "ClosedFormFunction",
    "CompactSupport",
    "DirichletProblem",
    "FracLapError",
    "FracParams",
    "GluedFunction",
    "Grid",
    "GridFunction",
    "Interval",
    "PowerGrowth",
    "QuadConfig",
    "Rectangle",
    "SolverOpts",
    "VerificationReport",
    "apply_weak_operator",
    "barrier_inner_term",
    "check_comparison",
    "check_energy_minimality",
    "check_log_lemma",
    "check_min_principle",
    "construct_hopf_barrier",
    "delta_s_boundedness_scan",
    "discrete_energy",
    "domain_from_spec",
    "estimate_holder_exponent",
    "evaluate_glued",
    "evaluate_op",
    "gagliardo_seminorm",
    "hopf_ratio_profile",
    "jump_perturbation_h",
    "log_lemma_terms",
    "read_csv",
    "sign_split_c",
    "signed_power",
    "solve_dirichlet",
    "tail_norm",
    "viscosity_touch_test",
    "weak_residual",
    "weak_subsolution_margin",
    "weak_supersolution_margin",
    "write_csv",
]

__version__ = "0.1.0"
