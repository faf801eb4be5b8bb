"""Expectation algebra: templated affine forms, guards, piecewise templates."""
from .boolexpr import (
    EMPTY_CUBE,
    FALSE,
    TRUE,
    And,
    Atom,
    BoolConst,
    BoolExpr,
    Cube,
    Not,
    conj,
    cube_expr,
    cubes_expr,
    disj,
    eq,
    format_cube,
    format_dnf,
    le,
    leq,
    less,
    lt,
    neg,
    to_cubes,
)
from .linexpr import LinExpr
from .normalize import CellChecker, combine, finalize, get_checker, normalize, refine, reset_checker, select
from .piecewise import (
    INF,
    ZERO,
    Body,
    GuardedSum,
    PartitionError,
    Piece,
    Piecewise,
    Value,
    body_add,
    body_scale,
    value_le,
)


def evaluate(expr, state, val=None):
    """Value of a piecewise template (or guarded sum) at ``state`` under ``val``."""
    return expr.evaluate(state, val or {})


def evaluate_at_state(T: Piecewise, state):
    """``T(s)``: a list of (template-variable condition, body) cases."""
    return T.at_state(state)


def substitute(expr, x: str, e: LinExpr):
    return expr.substitute(x, e)


def instantiate(T: Piecewise, val) -> Piecewise:
    return T.instantiate(val)


__all__ = [name for name in dir() if not name.startswith("_")]
