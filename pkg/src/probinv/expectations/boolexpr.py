"""Boolean expressions built from strict inequalities, negation and conjunction.

Atoms are kept in a canonical shape ``lin < 0``.  When an atom mentions only
program variables (which range over the naturals) it is tightened to integer
coefficients with gcd one, so that ``x <= 4``, ``x < 5`` and ``!(4 < x)`` all end
up as the very same object.  Its negation is again a single atom.  Atoms that
mention template variables are only scaled (they live over the rationals), and
their negation stays an explicit ``Not``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from fractions import Fraction
from math import ceil, floor
from typing import FrozenSet, Iterable, Mapping, Optional, Tuple, Union

from .linexpr import LinExpr


class BoolExpr:
    __slots__ = ()

    def evaluate(self, state: Mapping[str, int], val: Mapping[str, Fraction] | None = None) -> bool:
        raise NotImplementedError

    def subst(self, mapping: Mapping[str, LinExpr]) -> "BoolExpr":
        raise NotImplementedError

    def instantiate(self, val: Mapping[str, Fraction]) -> "BoolExpr":
        raise NotImplementedError

    def at_state(self, state: Mapping[str, int]) -> "BoolExpr":
        raise NotImplementedError

    def atoms(self) -> Iterable["Atom"]:
        raise NotImplementedError

    def pvars(self) -> set[str]:
        return set().union(*(a.lin.pvars() for a in self.atoms()))

    def tvars(self) -> set[str]:
        return set().union(*(a.lin.tvars() for a in self.atoms()))


@dataclass(frozen=True)
class BoolConst(BoolExpr):
    value: bool

    def evaluate(self, state, val=None):
        return self.value

    def subst(self, mapping):
        return self

    def instantiate(self, val):
        return self

    def at_state(self, state):
        return self

    def atoms(self):
        return ()

    def __str__(self):
        return "true" if self.value else "false"


TRUE = BoolConst(True)
FALSE = BoolConst(False)


@dataclass(frozen=True)
class Atom(BoolExpr):
    """``lin < 0``; construct through :func:`lt` / :func:`le` to get canonical form."""

    lin: LinExpr

    @property
    def integral(self) -> bool:
        return self.lin.has_pvars() and not self.lin.has_tvars()

    def evaluate(self, state, val=None):
        return self.lin.evaluate(state, val) < 0

    def subst(self, mapping):
        return lt(self.lin.subst(mapping))

    def instantiate(self, val):
        return lt(self.lin.instantiate(val))

    def at_state(self, state):
        return lt(self.lin.at_state(state))

    def atoms(self):
        return (self,)

    def __str__(self):
        left, right = _split_sides(self.lin)
        return f"{left} < {right}"


@dataclass(frozen=True)
class Not(BoolExpr):
    arg: BoolExpr

    def evaluate(self, state, val=None):
        return not self.arg.evaluate(state, val)

    def subst(self, mapping):
        return neg(self.arg.subst(mapping))

    def instantiate(self, val):
        return neg(self.arg.instantiate(val))

    def at_state(self, state):
        return neg(self.arg.at_state(state))

    def atoms(self):
        return self.arg.atoms()

    def __str__(self):
        if isinstance(self.arg, Atom):
            left, right = _split_sides(self.arg.lin)
            return f"{right} <= {left}"
        return f"!({self.arg})"


@dataclass(frozen=True)
class And(BoolExpr):
    args: Tuple[BoolExpr, ...]

    def evaluate(self, state, val=None):
        return all(a.evaluate(state, val) for a in self.args)

    def subst(self, mapping):
        return conj(a.subst(mapping) for a in self.args)

    def instantiate(self, val):
        return conj(a.instantiate(val) for a in self.args)

    def at_state(self, state):
        return conj(a.at_state(state) for a in self.args)

    def atoms(self):
        for a in self.args:
            yield from a.atoms()

    def __str__(self):
        return " & ".join(_paren(a) for a in self.args)


def _paren(b: BoolExpr) -> str:
    s = str(b)
    return f"({s})" if isinstance(b, And) or (isinstance(b, Not) and not isinstance(b.arg, Atom)) else s


def _split_sides(lin: LinExpr) -> Tuple[str, str]:
    pos = LinExpr._canonical({k: q for k, q in lin.terms.items() if q > 0})
    negs = LinExpr._canonical({k: -q for k, q in lin.terms.items() if q < 0})
    return str(pos), str(negs)


# -- canonical constructors -------------------------------------------------

def _integral_form(lin: LinExpr, strict: bool) -> BoolExpr:
    """Canonical integer atom equivalent over the naturals to ``lin < 0`` / ``lin <= 0``.

    Atoms that are constant over the naturals fold to ``TRUE`` / ``FALSE``.
    """
    scaled, _ = lin.integer_scaled()
    g = scaled.content_gcd(include_constant=False)
    c = scaled.constant()
    var_part = LinExpr._canonical({k: q / g for k, q in scaled.terms.items() if k != (None, None)})
    r = Fraction(-c, g)
    bound = ceil(r) if strict else floor(r) + 1  # var_part < bound
    coeffs = list(var_part.terms.values())
    if all(q > 0 for q in coeffs) and bound <= 0:
        return FALSE  # a nonnegative combination of naturals is never negative
    if all(q < 0 for q in coeffs) and bound > 0:
        return TRUE
    return Atom(var_part - bound)


def _rational_form(lin: LinExpr) -> LinExpr:
    lead = next(iter(lin.terms.values()))
    return lin.scale(1 / abs(lead))


def lt(lin: LinExpr) -> BoolExpr:
    """``lin < 0`` in canonical form."""
    if lin.is_constant():
        return TRUE if lin.constant() < 0 else FALSE
    if not lin.has_tvars():
        return _integral_form(lin, strict=True)
    return Atom(_rational_form(lin))


def le(lin: LinExpr) -> BoolExpr:
    """``lin <= 0`` in canonical form (a negated strict atom for rational atoms)."""
    if lin.is_constant():
        return TRUE if lin.constant() <= 0 else FALSE
    if not lin.has_tvars():
        return _integral_form(lin, strict=False)
    return Not(Atom(_rational_form(-lin)))


def less(a: LinExpr, b: LinExpr) -> BoolExpr:
    return lt(a - b)


def leq(a: LinExpr, b: LinExpr) -> BoolExpr:
    return le(a - b)


def eq(a: LinExpr, b: LinExpr) -> BoolExpr:
    return conj([leq(a, b), leq(b, a)])


def neg(b: BoolExpr) -> BoolExpr:
    if isinstance(b, BoolConst):
        return FALSE if b.value else TRUE
    if isinstance(b, Not):
        return b.arg
    if isinstance(b, Atom):
        if b.integral:
            return le(-b.lin)
        return Not(b)
    return Not(b)


def conj(items: Iterable[BoolExpr]) -> BoolExpr:
    out: list[BoolExpr] = []
    for b in items:
        if b == TRUE:
            continue
        if b == FALSE:
            return FALSE
        if isinstance(b, And):
            out.extend(b.args)
        else:
            out.append(b)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def disj(items: Iterable[BoolExpr]) -> BoolExpr:
    """Disjunction as sugar over negation and conjunction."""
    return neg(conj(neg(b) for b in items))


# -- literals and cubes -------------------------------------------------------

Literal = Union[Atom, Not]
Cube = FrozenSet[Literal]
EMPTY_CUBE: Cube = frozenset()


def lit_neg(l: Literal) -> Literal:
    r = neg(l)
    assert isinstance(r, (Atom, Not)), r
    return r


def lit_lin_strict(l: Literal) -> Tuple[LinExpr, bool]:
    """Literal as ``lin < 0`` (strict) or ``lin <= 0`` (non-strict)."""
    if isinstance(l, Atom):
        return l.lin, True
    assert isinstance(l, Not) and isinstance(l.arg, Atom)
    return -l.arg.lin, False


def to_cubes(b: BoolExpr, positive: bool = True) -> list[Cube]:
    """Pairwise disjoint cubes whose union is ``b`` (or its negation)."""
    if isinstance(b, BoolConst):
        return [EMPTY_CUBE] if b.value == positive else []
    if isinstance(b, Atom):
        lit = b if positive else neg(b)
        if isinstance(lit, BoolConst):
            return [EMPTY_CUBE] if lit.value else []
        return [frozenset([lit])]
    if isinstance(b, Not):
        return to_cubes(b.arg, not positive)
    assert isinstance(b, And)
    if positive:
        cubes = [EMPTY_CUBE]
        for a in b.args:
            cubes = [c | d for c in cubes for d in to_cubes(a, True)]
        return cubes
    out: list[Cube] = []
    prefix = [EMPTY_CUBE]
    for a in b.args:
        out.extend(c | d for c in prefix for d in to_cubes(a, False))
        prefix = [c | d for c in prefix for d in to_cubes(a, True)]
    return out


def cube_expr(c: Cube) -> BoolExpr:
    return conj(sorted(c, key=str))


def cubes_expr(cs: Iterable[Cube]) -> BoolExpr:
    return disj(cube_expr(c) for c in cs)


def cube_holds(c: Cube, state: Mapping[str, int], val: Mapping[str, Fraction] | None = None) -> bool:
    return all(l.evaluate(state, val) for l in c)


def single_var_bound(l: Literal) -> Optional[Tuple[str, str, int]]:
    """``x + k < 0`` gives ('hi', x, -k-1); ``-x + k < 0`` gives ('lo', x, k+1)."""
    if not (isinstance(l, Atom) and l.integral):
        return None
    terms = l.lin.terms
    keys = [k for k in terms if k != (None, None)]
    if len(keys) != 1:
        return None
    x = keys[0][0]
    a = terms[keys[0]]
    k = l.lin.constant()
    if a == 1:
        return ("hi", x, int(-k - 1))
    if a == -1:
        return ("lo", x, int(k + 1))
    return None


@lru_cache(maxsize=1 << 16)
def format_cube(c: Cube) -> str:
    if not c:
        return "true"
    lo: dict[str, Literal] = {}
    hi: dict[str, Literal] = {}
    bounds = {}
    for l in c:
        b = single_var_bound(l)
        if b:
            (lo if b[0] == "lo" else hi)[b[1]] = l
            bounds[l] = b
    parts = []
    used = set()
    for x in lo:
        if x in hi and bounds[lo[x]][2] == bounds[hi[x]][2]:
            parts.append(f"{x} = {bounds[lo[x]][2]}")
            used |= {lo[x], hi[x]}
    parts += [str(l) for l in c if l not in used]
    return " & ".join(sorted(parts))


def format_dnf(cs: Tuple[Cube, ...]) -> str:
    if not cs:
        return "false"
    if len(cs) == 1:
        return format_cube(cs[0])
    parts = sorted(format_cube(c) for c in cs)
    return " | ".join(f"({p})" if " & " in p else p for p in parts)


def cube_subst(c: Cube, mapping: Mapping[str, LinExpr]) -> list[Cube]:
    return to_cubes(conj(l.subst(mapping) for l in c))


def cube_instantiate(c: Cube, val: Mapping[str, Fraction]) -> list[Cube]:
    return to_cubes(conj(l.instantiate(val) for l in c))


def cube_at_state(c: Cube, state: Mapping[str, int]) -> list[Cube]:
    return to_cubes(conj(l.at_state(state) for l in c))

