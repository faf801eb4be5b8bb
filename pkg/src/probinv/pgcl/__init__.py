"""Front end for single-loop probabilistic programs."""
from . import ast
from .analysis import (
    StateSpaceTooLarge,
    enumerate_guard_states,
    is_finite_state,
    outcomes,
    path_conditions,
    paths,
)
from .parser import (
    ExpectationError,
    PgclError,
    PgclSyntaxError,
    ProbabilityError,
    UndeclaredVariable,
    UnderflowError,
    parse_expectation,
    parse_program,
    parse_property,
)
from .printer import format_program

__all__ = [
    "ast",
    "StateSpaceTooLarge",
    "enumerate_guard_states",
    "is_finite_state",
    "outcomes",
    "path_conditions",
    "paths",
    "ExpectationError",
    "PgclError",
    "PgclSyntaxError",
    "ProbabilityError",
    "UndeclaredVariable",
    "UnderflowError",
    "parse_expectation",
    "parse_program",
    "parse_property",
    "format_program",
]
