"""Solver and certifier for nonlocal elliptic systems with functional BCs.

The package computes weak solutions of systems

    L_i u_i = lambda_i f_i(x, u, w_i[u])     in Omega,
    B_i u_i = eta_i zeta_i(x) h_i[u]         on the boundary,

as fixed points of u = T(u) + Gamma(u), and numerically checks the
algebraic conditions that certify the existence of a nonzero positive
solution in a box of states, or that only the zero solution exists.
"""

__version__ = "0.1.0"

from .errors import (AssemblyError, ConfigError, EvaluationError,
                     GridMismatchError, NellsysError, NonConvergenceError,
                     NumericError, ParseError, PointOutsideDomainError,
                     SchemaError, ValidationError)
from .grid import (Domain, Grid, PolarGrid, RectGrid, ScalarField, SystemState,
                   build_grid, eval_at_point, quadrature_integral, sup_norm)
from .expr import (eval_expr, free_variables, parse_expression,
                   parse_functional_expression, to_source)
from .elliptic import (BoundarySpec, DiscreteOperator, Eigenpair, OperatorSpec,
                       ValidationReport, apply_K, assemble, lift_gamma,
                       principal_eigenpair, validate_operator)
from .problem import (Component, DiscreteProblem, FunctionalRange,
                      FunctionalSpec, ProblemSpec, discretize, eval_functional,
                      functional_range, load_problem, random_state)
from .solver import (SolveResult, SolverOptions, apply_Gamma, apply_T,
                     multi_start_solve, solve_fixed_point)
from .certify import (ExistenceCertificate, Minorant, NonexistenceCertificate,
                      TauTheta, certify_existence, certify_nonexistence,
                      check_condition_c, estimate_M, estimate_tau_theta)
from .presets import builtin_document, builtin_example, builtin_ids
from .report import ReportDocument, export_result
from .cli import CommandRequest, run_command

__all__ = [name for name in dir() if not name.startswith("_")]
