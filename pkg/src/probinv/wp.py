"""Weakest preexpectations of loop-free bodies and the loop's characteristic functional.

Every intermediate result is kept in partition form: an assignment substitutes
into the guards and bodies, a probabilistic choice overlays the two partitions and
adds the weighted bodies cell by cell, and a conditional selects cells on either
side of the branch condition.  Probabilities are multiplied into the template
coefficients right away, so bodies stay affine in the template variables.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Mapping

from .expectations import GuardedSum, Piecewise, combine, normalize, select
from .expectations.piecewise import INF, Value
from .pgcl import ast as A
from .pgcl.analysis import expr_lin, guard_bool, outcomes


@lru_cache(maxsize=4096)
def wp_piecewise(c: A.Stmt, T: Piecewise) -> Piecewise:
    if isinstance(c, A.Skip):
        return T
    if isinstance(c, A.Assign):
        return normalize(GuardedSum.from_piecewise(T.subst({c.var: expr_lin(c.expr)})))
    if isinstance(c, A.Seq):
        return wp_piecewise(c.first, wp_piecewise(c.second, T))
    if isinstance(c, A.PChoice):
        if c.prob == 1:
            return wp_piecewise(c.left, T)
        if c.prob == 0:
            return wp_piecewise(c.right, T)
        return combine([(c.prob, wp_piecewise(c.left, T)), (1 - c.prob, wp_piecewise(c.right, T))])
    if isinstance(c, A.Ite):
        return select(guard_bool(c.cond), wp_piecewise(c.then, T), wp_piecewise(c.other, T))
    raise TypeError(c)


def wp(c: A.Stmt, T: Piecewise) -> GuardedSum:
    """``wp[c](T)`` as a guarded sum whose guards already form a partition."""
    return GuardedSum.from_piecewise(wp_piecewise(c, T))


def char_fun(loop: A.LoopProgram, f: Piecewise, T: Piecewise) -> Piecewise:
    """``[!phi]*f + [phi]*wp[body](T)`` in partition form."""
    if not f.is_concrete():
        raise ValueError("the postexpectation may not contain template variables")
    return select(loop.phi, wp_piecewise(loop.body, T), f)


class CharFunctional:
    """The characteristic functional of one loop and postexpectation, with a per-template cache."""

    def __init__(self, loop: A.LoopProgram, f: Piecewise):
        self.loop = loop
        self.f = f
        self._cache: dict[Piecewise, Piecewise] = {}

    def apply(self, T: Piecewise) -> Piecewise:
        hit = self._cache.get(T)
        if hit is None:
            hit = self._cache[T] = char_fun(self.loop, self.f, T)
        return hit

    def apply_instance(self, T: Piecewise, val: Mapping[str, Fraction]) -> Piecewise:
        """``Phi_f`` of the instance of ``T``, read off the cached symbolic result."""
        return self.apply(T).instantiate(val)

    def value_at(self, I: Piecewise, state: Mapping[str, int]) -> Value:
        """``Phi_f(I)(s)`` computed operationally from the body's outcome distribution."""
        if not self.loop.phi.evaluate(state):
            return self.f.evaluate(state)
        return expected_value_oracle(self.loop.body, I, state)


def expected_value_oracle(c: A.Stmt, f: Piecewise, state: Mapping[str, int]) -> Value:
    """Expected value of ``f`` after running ``c`` once from ``state`` (by enumeration)."""
    total = Fraction(0)
    for s2, p in outcomes(c, state):
        v = f.evaluate(s2)
        if v is INF:
            return INF
        total += p * v
    return total
