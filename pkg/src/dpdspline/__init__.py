"""Robust nonparametric GLM fitting with density power divergence penalized splines."""

__version__ = "0.1.0"

from .basis import (KnotVector, SplineBasis, assemble, build_knots, design_matrix,
                    difference_penalty, eval_basis, reproducing_kernel)
from .bench import BenchReport, Scenario, format_table, generate, run_benchmark, test_function
from .diagnostics import ResidualReport, anscombe_residuals, incomplete_beta
from .exceptions import (BadInitError, DegenerateDataError, DomainError, DpdSplineError,
                         InvalidDesignError, InvalidOrderError, SelectionFailedError,
                         SingularSystemError)
from .families import (Bernoulli, DpdTerms, Exponential, Family, Gaussian, Poisson, get_family,
                       robust_scale_gaussian)
from .loss import LossEval, irls_step_data, loss, penalized_gradient, penalized_objective
from .selection import (SelectionReport, aic, amise, default_alpha_grid, default_lambda_grid,
                        select_alpha, select_lambda)
from .solver import FitResult, SolverOptions, effective_df, fit, fit_alpha_path, initialize
