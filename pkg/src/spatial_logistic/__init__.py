"""Moment-closure analysis of the spatial stochastic logistic model."""
from .errors import *  # noqa: F401,F403
from .kernels import (  # noqa: F401
    Kernel,
    ModelParams,
    ValidationReport,
    make_bump_kernel,
    make_gaussian_kernel,
    make_numeric_kernel,
    make_table_kernel,
    scale_kernel,
    validate_assumptions,
)

__version__ = "0.1.0"
