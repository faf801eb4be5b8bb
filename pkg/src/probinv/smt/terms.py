"""Constraint trees and their SMT-LIB2 rendering.

Program variables are declared ``Int`` (and asserted nonnegative), template
variables and multipliers ``Real``.  Comparisons that only mention program
variables are scaled to integer coefficients, and a strict ``t < 0`` is emitted as
``t + 1 <= 0``.  Everything else is emitted over the reals with ``to_real``
coercions, so the scripts are valid SMT-LIB 2.6.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Tuple

from ..expectations.boolexpr import Atom, Cube, Not
from ..expectations.linexpr import LinExpr


def pname(x: str) -> str:
    return f"|p:{x}|"


def tname(a: str) -> str:
    return f"|t:{a}|"


def num(q: Fraction | int, real: bool) -> str:
    q = Fraction(q)
    if real:
        if q.denominator == 1:
            s = f"{abs(q.numerator)}.0"
        else:
            s = f"(/ {abs(q.numerator)}.0 {q.denominator}.0)"
    else:
        if q.denominator != 1:
            raise ValueError("integer numeral expected")
        s = str(abs(q.numerator))
    return f"(- {s})" if q < 0 else s


def lin_term(lin: LinExpr, real: bool) -> str:
    parts = []
    for (pv, tv), q in lin.terms.items():
        factors = []
        if pv is not None:
            factors.append(f"(to_real {pname(pv)})" if real else pname(pv))
        if tv is not None:
            factors.append(tname(tv))
        if not factors:
            parts.append(num(q, real))
            continue
        if q != 1:
            factors.insert(0, num(q, real))
        parts.append(factors[0] if len(factors) == 1 else f"(* {' '.join(factors)})")
    if not parts:
        return num(0, real)
    if len(parts) == 1:
        return parts[0]
    return f"(+ {' '.join(parts)})"


class Constraint:
    __slots__ = ()

    def render(self) -> str:
        raise NotImplementedError

    def evaluate(self, state: Mapping[str, int], val: Mapping[str, Fraction]) -> bool:
        raise NotImplementedError

    def pvars(self) -> set[str]:
        raise NotImplementedError

    def tvars(self) -> set[str]:
        raise NotImplementedError


@dataclass(frozen=True)
class Cmp(Constraint):
    """``lin op 0`` with op one of ``<``, ``<=``, ``=``."""

    lin: LinExpr
    op: str

    def render(self) -> str:
        lin = self.lin
        if lin.is_constant():
            return "true" if self._const_holds() else "false"
        if not lin.has_tvars():
            scaled, _ = lin.integer_scaled()
            if self.op == "<":
                return f"(<= {lin_term(scaled + 1, False)} 0)"
            return f"({self.op} {lin_term(scaled, False)} 0)"
        return f"({self.op} {lin_term(lin, True)} 0.0)"

    def _const_holds(self) -> bool:
        c = self.lin.constant()
        return {"<": c < 0, "<=": c <= 0, "=": c == 0}[self.op]

    def evaluate(self, state, val):
        v = self.lin.evaluate(state, val)
        return {"<": v < 0, "<=": v <= 0, "=": v == 0}[self.op]

    def pvars(self):
        return self.lin.pvars()

    def tvars(self):
        return self.lin.tvars()


@dataclass(frozen=True)
class CNot(Constraint):
    arg: Constraint

    def render(self):
        return f"(not {self.arg.render()})"

    def evaluate(self, state, val):
        return not self.arg.evaluate(state, val)

    def pvars(self):
        return self.arg.pvars()

    def tvars(self):
        return self.arg.tvars()


@dataclass(frozen=True)
class _Nary(Constraint):
    args: Tuple[Constraint, ...]

    def pvars(self):
        return set().union(*(a.pvars() for a in self.args)) if self.args else set()

    def tvars(self):
        return set().union(*(a.tvars() for a in self.args)) if self.args else set()


class CAnd(_Nary):
    def render(self):
        if not self.args:
            return "true"
        if len(self.args) == 1:
            return self.args[0].render()
        return "(and " + " ".join(a.render() for a in self.args) + ")"

    def evaluate(self, state, val):
        return all(a.evaluate(state, val) for a in self.args)


class COr(_Nary):
    def render(self):
        if not self.args:
            return "false"
        if len(self.args) == 1:
            return self.args[0].render()
        return "(or " + " ".join(a.render() for a in self.args) + ")"

    def evaluate(self, state, val):
        return any(a.evaluate(state, val) for a in self.args)


@dataclass(frozen=True)
class CImplies(Constraint):
    lhs: Constraint
    rhs: Constraint

    def render(self):
        return f"(=> {self.lhs.render()} {self.rhs.render()})"

    def evaluate(self, state, val):
        return (not self.lhs.evaluate(state, val)) or self.rhs.evaluate(state, val)

    def pvars(self):
        return self.lhs.pvars() | self.rhs.pvars()

    def tvars(self):
        return self.lhs.tvars() | self.rhs.tvars()


@dataclass(frozen=True)
class CBool(Constraint):
    value: bool

    def render(self):
        return "true" if self.value else "false"

    def evaluate(self, state, val):
        return self.value

    def pvars(self):
        return set()

    def tvars(self):
        return set()


@dataclass(frozen=True)
class CRaw(Constraint):
    """Pre-rendered SMT-LIB term (used for non-linear helpers such as ``ite``-based distances)."""

    text: str
    program_vars: frozenset
    template_vars: frozenset = frozenset()
    fn: object = None  # optional evaluator (state, val) -> bool

    def render(self):
        return self.text

    def evaluate(self, state, val):
        if self.fn is None:
            raise NotImplementedError("raw constraint without evaluator")
        return self.fn(state, val)

    def pvars(self):
        return set(self.program_vars)

    def tvars(self):
        return set(self.template_vars)


CTRUE = CBool(True)
CFALSE = CBool(False)


def conj_c(items: Iterable[Constraint]) -> Constraint:
    out = []
    for c in items:
        if c == CTRUE:
            continue
        if c == CFALSE:
            return CFALSE
        out.append(c)
    if not out:
        return CTRUE
    return out[0] if len(out) == 1 else CAnd(tuple(out))


def disj_c(items: Iterable[Constraint]) -> Constraint:
    out = []
    for c in items:
        if c == CFALSE:
            continue
        if c == CTRUE:
            return CTRUE
        out.append(c)
    if not out:
        return CFALSE
    return out[0] if len(out) == 1 else COr(tuple(out))


def lt_c(a: LinExpr, b: LinExpr | int | Fraction = 0) -> Constraint:
    return _cmp(a - b, "<")


def le_c(a: LinExpr, b: LinExpr | int | Fraction = 0) -> Constraint:
    return _cmp(a - b, "<=")


def eq_c(a: LinExpr, b: LinExpr | int | Fraction = 0) -> Constraint:
    return _cmp(a - b, "=")


def _cmp(lin: LinExpr, op: str) -> Constraint:
    c = Cmp(lin, op)
    if lin.is_constant():
        return CTRUE if c._const_holds() else CFALSE
    return c


def literal_c(l) -> Constraint:
    if isinstance(l, Atom):
        return _cmp(l.lin, "<")
    assert isinstance(l, Not) and isinstance(l.arg, Atom)
    return _cmp(-l.arg.lin, "<=")


def cube_c(c: Cube) -> Constraint:
    return conj_c(literal_c(l) for l in sorted(c, key=str))


def dnf_c(cubes: Iterable[Cube]) -> Constraint:
    return disj_c(cube_c(c) for c in cubes)


def declare_for(session, constraint_vars: Tuple[set[str], set[str]]) -> None:
    """Declare program variables (Int, nonnegative) and template variables (Real)."""
    pvars, tvars = constraint_vars
    for x in sorted(pvars):
        if pname(x) not in session.declared:
            session.declare(pname(x), "Int")
            session.assert_(f"(>= {pname(x)} 0)")
    for a in sorted(tvars):
        session.declare(tname(a), "Real")
