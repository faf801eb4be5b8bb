"""Typed syntax trees for single-loop probabilistic programs.

Only the core constructors live here: arithmetic ``z | x | z*e | e+e | e-e``,
guards ``e < e | !b | b & b``, and the loop-free statements.  Surface sugar
(``<=``, ``=``, ``|``, categorical assignment, missing ``else``) is expanded by the
parser before any of these objects are built.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Tuple

from ..expectations.boolexpr import BoolExpr, conj, less, neg
from ..expectations.linexpr import LinExpr


# -- arithmetic -----------------------------------------------------------------

class ProgramExpr:
    __slots__ = ()

    def to_lin(self) -> LinExpr:
        raise NotImplementedError

    def vars(self) -> set[str]:
        raise NotImplementedError

    def evaluate(self, state) -> int:
        return int(self.to_lin().evaluate(state))


@dataclass(frozen=True)
class Const(ProgramExpr):
    value: int

    def to_lin(self):
        return LinExpr.const(self.value)

    def vars(self):
        return set()


@dataclass(frozen=True)
class Var(ProgramExpr):
    name: str

    def to_lin(self):
        return LinExpr.var(self.name)

    def vars(self):
        return {self.name}


@dataclass(frozen=True)
class Scale(ProgramExpr):
    factor: int
    arg: ProgramExpr

    def to_lin(self):
        return self.arg.to_lin().scale(self.factor)

    def vars(self):
        return self.arg.vars()


@dataclass(frozen=True)
class Add(ProgramExpr):
    left: ProgramExpr
    right: ProgramExpr

    def to_lin(self):
        return self.left.to_lin() + self.right.to_lin()

    def vars(self):
        return self.left.vars() | self.right.vars()


@dataclass(frozen=True)
class Sub(ProgramExpr):
    left: ProgramExpr
    right: ProgramExpr

    def to_lin(self):
        return self.left.to_lin() - self.right.to_lin()

    def vars(self):
        return self.left.vars() | self.right.vars()


# -- guards ---------------------------------------------------------------------

class Guard:
    __slots__ = ()

    def to_bool(self) -> BoolExpr:
        raise NotImplementedError

    def vars(self) -> set[str]:
        raise NotImplementedError

    def evaluate(self, state) -> bool:
        return self.to_bool().evaluate(state)


@dataclass(frozen=True)
class Lt(Guard):
    left: ProgramExpr
    right: ProgramExpr

    def to_bool(self):
        return less(self.left.to_lin(), self.right.to_lin())

    def vars(self):
        return self.left.vars() | self.right.vars()


@dataclass(frozen=True)
class GNot(Guard):
    arg: Guard

    def to_bool(self):
        return neg(self.arg.to_bool())

    def vars(self):
        return self.arg.vars()


@dataclass(frozen=True)
class GAnd(Guard):
    left: Guard
    right: Guard

    def to_bool(self):
        return conj([self.left.to_bool(), self.right.to_bool()])

    def vars(self):
        return self.left.vars() | self.right.vars()


# -- statements -----------------------------------------------------------------

class Stmt:
    __slots__ = ()

    def assigned(self) -> set[str]:
        raise NotImplementedError

    def vars(self) -> set[str]:
        raise NotImplementedError


@dataclass(frozen=True)
class Skip(Stmt):
    def assigned(self):
        return set()

    def vars(self):
        return set()


@dataclass(frozen=True)
class Assign(Stmt):
    var: str
    expr: ProgramExpr

    def assigned(self):
        return {self.var}

    def vars(self):
        return {self.var} | self.expr.vars()


@dataclass(frozen=True)
class Seq(Stmt):
    first: Stmt
    second: Stmt

    def assigned(self):
        return self.first.assigned() | self.second.assigned()

    def vars(self):
        return self.first.vars() | self.second.vars()


@dataclass(frozen=True)
class PChoice(Stmt):
    """``{left}[prob]{right}``: ``left`` runs with probability ``prob``."""

    left: Stmt
    prob: Fraction
    right: Stmt

    def assigned(self):
        return self.left.assigned() | self.right.assigned()

    def vars(self):
        return self.left.vars() | self.right.vars()


@dataclass(frozen=True)
class Ite(Stmt):
    cond: Guard
    then: Stmt
    other: Stmt

    def assigned(self):
        return self.then.assigned() | self.other.assigned()

    def vars(self):
        return self.cond.vars() | self.then.vars() | self.other.vars()


def seq(stmts) -> Stmt:
    """Right-nested sequence; the empty sequence is ``skip``."""
    stmts = list(stmts)
    if not stmts:
        return Skip()
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = Seq(s, out)
    return out


def flatten_seq(s: Stmt) -> list[Stmt]:
    if isinstance(s, Seq):
        return flatten_seq(s.first) + flatten_seq(s.second)
    return [s]


# -- programs -------------------------------------------------------------------

@dataclass(frozen=True)
class Decl:
    name: str
    lo: Optional[int] = None
    hi: Optional[int] = None

    @property
    def bounded(self) -> bool:
        return self.hi is not None

    @property
    def lower(self) -> int:
        return self.lo if self.lo is not None else 0


@dataclass(frozen=True)
class LoopProgram:
    decls: Tuple[Decl, ...]
    guard: Guard
    body: Stmt
    _phi: list = field(default_factory=list, compare=False, repr=False)

    @property
    def variables(self) -> list[str]:
        return [d.name for d in self.decls]

    def decl(self, name: str) -> Decl:
        for d in self.decls:
            if d.name == name:
                return d
        raise KeyError(name)

    @property
    def phi(self) -> BoolExpr:
        """The loop guard as a canonical Boolean expression (cached)."""
        if not self._phi:
            self._phi.append(self.guard.to_bool())
        return self._phi[0]

    def is_bounded(self) -> bool:
        return all(d.bounded for d in self.decls)
