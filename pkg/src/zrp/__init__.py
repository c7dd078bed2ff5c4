"""Numerical laboratory for zero-range particle systems on finite lattices.

The package computes, exactly where possible, the equilibrium structure of
zero-range dynamics with near-linear jump rates: grand-canonical and
canonical occupation laws, the distribution of the particle count in half a
box and its log-concave regularization, spectral gaps and log-Sobolev
constants of the full dynamics and of the induced birth-death chain on the
count, the measure identities behind the two-block decomposition of the
entropy, local-limit asymptotics of the count law, and event-driven
simulation of the dynamics themselves.
"""

__version__ = "0.1.0"

from .errors import (
    CapExceededError,
    ConfigError,
    NonConvergenceError,
    NumericError,
    TailMassError,
    ZRPError,
)
from .rates import ConditionReport, RateFunction, build_family, check_conditions, load_user_table

__all__ = [
    "CapExceededError",
    "ConfigError",
    "ConditionReport",
    "NonConvergenceError",
    "NumericError",
    "RateFunction",
    "TailMassError",
    "ZRPError",
    "build_family",
    "check_conditions",
    "load_user_table",
    "__version__",
]
