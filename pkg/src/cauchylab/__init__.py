"""Characteristic evolution and diagnostics for radial semilinear waves near singular light cones."""

from .errors import (BlowUpError, BoundaryError, ConfigError, DataError, DomainError, ExtensionError,
                     LabError, NonConvergenceError, OrderError, StepError, UnsupportedError)
from .geometry import DomainSpec, DoubleNullPoint, Grid, WeightVector, build_grid
from .models import EquationSpec, check_exponents, nonlinearity_split
from .profiles import Profile, solve_self_similar_profile
from .solver import FieldGrid, evolve

__version__ = "0.1.0"

__all__ = [
    "BlowUpError", "BoundaryError", "ConfigError", "DataError", "DomainError", "ExtensionError",
    "LabError", "NonConvergenceError", "OrderError", "StepError", "UnsupportedError",
    "DomainSpec", "DoubleNullPoint", "Grid", "WeightVector", "build_grid",
    "EquationSpec", "check_exponents", "nonlinearity_split", "Profile",
    "solve_self_similar_profile", "FieldGrid", "evolve",
]
