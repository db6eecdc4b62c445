"""Numerical laboratory for regularity of degenerate parabolic-hyperbolic
equations with stochastic forcing: kinetic symbols, non-degeneracy
exponents, a finite-volume solver, kinetic averages and Littlewood-Paley
smoothness estimates."""
from .coeffs import CoefficientModel, burgers, eval_symbol, heat, powerlaw, tabulated, validate_model
from .errors import (CFLError, ConfigError, DomainError, InputValidationError, InsufficientResolution,
                     KinregError, RangeError, ShapeError)
from .nondeg import estimate_alpha, exponents, measure_degenerate_set
from .regularity import besov_slope, slobodetskii_seminorm, spacetime_regularity
from .solver import make_grid, run, solve, solve_ensemble

__version__ = "0.1.0"
