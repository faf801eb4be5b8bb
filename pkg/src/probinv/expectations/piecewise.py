"""Piecewise templates and guarded sums.

A :class:`Piecewise` is a tuple of pieces ``(guard, body)``.  A guard is a tuple of
pairwise disjoint cubes (conjunctions of canonical literals), so one piece may
stand for several cells that happen to share the same body.  Pieces partition the
state space for every valuation.  A :class:`GuardedSum` has the same shape but its
denotation is the *sum* of all terms whose guard holds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Tuple, Union

from .boolexpr import (
    EMPTY_CUBE,
    BoolExpr,
    Cube,
    cube_at_state,
    cube_holds,
    cube_instantiate,
    cube_subst,
    format_cube,
    format_dnf,
    to_cubes,
)
from .linexpr import LinExpr


class PartitionError(RuntimeError):
    """Zero or several pieces hold at a point; signals a normalization bug."""


class _Infinity:
    __slots__ = ()
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __str__(self):
        return "INF"

    __repr__ = __str__

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()
Body = Union[LinExpr, _Infinity]
Value = Union[Fraction, _Infinity]
ZERO = LinExpr()


def body_add(a: Body, b: Body) -> Body:
    if a is INF or b is INF:
        return INF
    return a + b


def body_scale(a: Body, q: Fraction) -> Body:
    if a is INF:
        if q == 0:
            raise ValueError("0 * INF is not used in this calculus")
        return INF
    return a.scale(q)


def body_str(b: Body) -> str:
    if b is INF:
        return "INF"
    s = str(b)
    simple = len(b.terms) <= 1 and not s.startswith("-") and "(" not in s and " " not in s
    return s if simple else f"({s})"


def value_le(a: Value, b: Value) -> bool:
    if b is INF:
        return True
    if a is INF:
        return False
    return a <= b


@dataclass(frozen=True)
class Piece:
    guard: Tuple[Cube, ...]
    body: Body

    def holds(self, state, val=None) -> bool:
        return any(cube_holds(c, state, val) for c in self.guard)

    def guard_tvars(self) -> set[str]:
        return {tv for c in self.guard for l in c for tv in l.tvars()}


def _canonical(pieces: Iterable[Piece]) -> Tuple[Piece, ...]:
    merged: dict = {}
    order: list = []
    for p in pieces:
        if not p.guard:
            continue
        if p.body not in merged:
            merged[p.body] = []
            order.append(p.body)
        merged[p.body].extend(p.guard)
    out = [Piece(tuple(sorted(set(merged[b]), key=format_cube)), b) for b in order]
    out.sort(key=lambda p: (format_dnf(p.guard), body_str(p.body)))
    return tuple(out)


@dataclass(frozen=True)
class Piecewise:
    """Piecewise expectation or template; guards form a partition of the state space."""

    pieces: Tuple[Piece, ...]

    @staticmethod
    def make(pieces: Iterable[Piece]) -> "Piecewise":
        return Piecewise(_canonical(pieces))

    @staticmethod
    def constant(q: Fraction | int | LinExpr) -> "Piecewise":
        body = q if isinstance(q, LinExpr) else LinExpr.const(q)
        return Piecewise((Piece((EMPTY_CUBE,), body),))

    # -- inspection -----------------------------------------------------------
    def __len__(self) -> int:
        return len(self.pieces)

    def cells(self) -> list[Tuple[Cube, Body]]:
        return [(c, p.body) for p in self.pieces for c in p.guard]

    def tvars(self) -> set[str]:
        out: set[str] = set()
        for p in self.pieces:
            out |= p.guard_tvars()
            if p.body is not INF:
                out |= p.body.tvars()
        return out

    def pvars(self) -> set[str]:
        out: set[str] = set()
        for c, b in self.cells():
            for l in c:
                out |= l.pvars()
            if b is not INF:
                out |= b.pvars()
        return out

    def is_fixed_partition(self) -> bool:
        return not any(p.guard_tvars() for p in self.pieces)

    def is_concrete(self) -> bool:
        return not self.tvars()

    def has_inf(self) -> bool:
        return any(p.body is INF for p in self.pieces)

    # -- semantics ------------------------------------------------------------
    def piece_at(self, state: Mapping[str, int], val: Mapping[str, Fraction] | None = None) -> Piece:
        hits = [p for p in self.pieces if p.holds(state, val)]
        if len(hits) != 1:
            raise PartitionError(f"{len(hits)} pieces hold at {dict(state)}")
        return hits[0]

    def evaluate(self, state: Mapping[str, int], val: Mapping[str, Fraction] | None = None) -> Value:
        body = self.piece_at(state, val).body
        if body is INF:
            return INF
        return body.evaluate(state, val)

    def at_state(self, state: Mapping[str, int]) -> list[Tuple[Cube, Body]]:
        """``T(s)``: cases over template-variable conditions (a single case when fixed-partition)."""
        out = []
        for c, b in self.cells():
            for tc in cube_at_state(c, state):
                out.append((tc, b if b is INF else b.at_state(state)))
        return out

    def instantiate(self, val: Mapping[str, Fraction]) -> "Piecewise":
        out = []
        for c, b in self.cells():
            for ic in cube_instantiate(c, val):
                out.append(Piece((ic,), b if b is INF else b.instantiate(val)))
        return Piecewise.make(out)

    def substitute(self, x: str, e: LinExpr) -> "Piecewise":
        return self.subst({x: e})

    def subst(self, mapping: Mapping[str, LinExpr]) -> "Piecewise":
        out = []
        for c, b in self.cells():
            for sc in cube_subst(c, mapping):
                out.append(Piece((sc,), b if b is INF else b.subst(mapping)))
        return Piecewise.make(out)

    def map_bodies(self, fn) -> "Piecewise":
        return Piecewise.make(Piece(p.guard, fn(p.body)) for p in self.pieces)

    # -- printing ---------------------------------------------------------------
    def __str__(self) -> str:
        return format_piecewise(self)

    def to_json(self) -> list[dict]:
        out = []
        for p in self.pieces:
            if p.body is INF:
                body = "INF"
            else:
                body = {
                    "const": str(p.body.constant()),
                    "coeffs": {pv: str(q) for (pv, tv), q in p.body.terms.items() if pv is not None and tv is None},
                }
                if p.body.has_tvars():
                    body["template"] = str(p.body)
            out.append({"guard": format_dnf(p.guard), "body": body})
        return out


def format_piecewise(pw: Piecewise) -> str:
    if not pw.pieces:
        return "0"
    parts = []
    for p in pw.pieces:
        g = format_dnf(p.guard)
        parts.append(f"[{g}]*{body_str(p.body)}")
    return " + ".join(parts)


@dataclass(frozen=True)
class GuardedSum:
    """Sum of guarded terms; guards need not partition unless ``partition`` is set."""

    terms: Tuple[Piece, ...]
    partition: bool = field(default=False, compare=False)

    @staticmethod
    def of(items: Iterable[Tuple[BoolExpr, Body]]) -> "GuardedSum":
        return GuardedSum(tuple(Piece(tuple(to_cubes(g)), b) for g, b in items))

    @staticmethod
    def from_piecewise(pw: Piecewise) -> "GuardedSum":
        return GuardedSum(pw.pieces, partition=True)

    def evaluate(self, state: Mapping[str, int], val: Mapping[str, Fraction] | None = None) -> Value:
        total: Value = Fraction(0)
        for t in self.terms:
            if t.holds(state, val):
                if t.body is INF:
                    return INF
                total += t.body.evaluate(state, val)
        return total

    def substitute(self, x: str, e: LinExpr) -> "GuardedSum":
        return self.subst({x: e})

    def subst(self, mapping: Mapping[str, LinExpr]) -> "GuardedSum":
        out = []
        for t in self.terms:
            cubes = tuple(sc for c in t.guard for sc in cube_subst(c, mapping))
            out.append(Piece(cubes, t.body if t.body is INF else t.body.subst(mapping)))
        return GuardedSum(tuple(out), self.partition)

    def __str__(self) -> str:
        return " + ".join(f"[{format_dnf(t.guard)}]*{body_str(t.body)}" for t in self.terms) or "0"
