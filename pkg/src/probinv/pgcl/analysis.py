"""Static facts about a loop: symbolic paths, underflow safety, finiteness, state enumeration.

Declared bounds are metadata.  Everything the verifier proves ranges over all of
the naturals; bounds are used to decide finiteness (every guard state lies in the
declared box), to enumerate the guard states, and to pick refinement boundaries.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from fractions import Fraction
from math import prod
from typing import Iterator, Mapping, Optional

from ..expectations.boolexpr import (
    BoolExpr,
    conj,
    leq,
    neg,
    single_var_bound,
    to_cubes,
)
from ..expectations.linexpr import LinExpr
from . import ast as A
from .parser import UnderflowError


class StateSpaceTooLarge(RuntimeError):
    """Enumerating the guard states would exceed the configured cap."""


@dataclass(frozen=True)
class Path:
    """One branch of the body: probability, condition on the pre-state, final substitution."""

    prob: Fraction
    cond: BoolExpr
    subst: Mapping[str, LinExpr]


@dataclass(frozen=True)
class _Obligation:
    cond: BoolExpr
    var: str
    value: LinExpr


def _walk(s: A.Stmt, prob: Fraction, conds: tuple, sigma: dict, obligations: Optional[list]) -> Iterator[tuple]:
    if isinstance(s, A.Skip):
        yield prob, conds, sigma
    elif isinstance(s, A.Assign):
        value = s.expr.to_lin().subst(sigma)
        if obligations is not None:
            obligations.append(_Obligation(conj(conds), s.var, value))
        nxt = dict(sigma)
        nxt[s.var] = value
        yield prob, conds, nxt
    elif isinstance(s, A.Seq):
        for p1, c1, s1 in _walk(s.first, prob, conds, sigma, obligations):
            yield from _walk(s.second, p1, c1, s1, obligations)
    elif isinstance(s, A.PChoice):
        if s.prob != 0:
            yield from _walk(s.left, prob * s.prob, conds, sigma, obligations)
        if s.prob != 1:
            yield from _walk(s.right, prob * (1 - s.prob), conds, sigma, obligations)
    elif isinstance(s, A.Ite):
        psi = s.cond.to_bool().subst(sigma)
        yield from _walk(s.then, prob, conds + (psi,), sigma, obligations)
        yield from _walk(s.other, prob, conds + (neg(psi),), sigma, obligations)
    else:
        raise TypeError(s)


def paths(body: A.Stmt, variables) -> list[Path]:
    ident = {x: LinExpr.var(x) for x in variables}
    return [Path(p, conj(c), s) for p, c, s in _walk(body, Fraction(1), (), ident, None)]


def path_conditions(body: A.Stmt, variables) -> list[BoolExpr]:
    """Distinct branch conditions of the body's if-structure, in first-seen order."""
    seen: list[BoolExpr] = []
    for p in paths(body, variables):
        if p.cond not in seen:
            seen.append(p.cond)
    return seen


def check_underflow(prog: A.LoopProgram) -> None:
    """Reject assignments that can go below a declared lower bound from some guard state."""
    from ..expectations.normalize import get_checker
    from ..smt.terms import conj_c, declare_for, literal_c, lt_c, pname

    obligations: list[_Obligation] = []
    ident = {x: LinExpr.var(x) for x in prog.variables}
    list(_walk(prog.body, Fraction(1), (), ident, obligations))
    for ob in obligations:
        lo = prog.decl(ob.var).lower
        v = ob.value
        if all(q >= 0 for k, q in v.terms.items() if k != (None, None)) and v.constant() >= lo:
            continue
        session = get_checker()._smt()
        for cube in to_cubes(conj([prog.phi, ob.cond])):
            c = conj_c([*(literal_c(l) for l in cube), lt_c(v, LinExpr.const(lo))])
            declare_for(session, (set(prog.variables), set()))
            session.push()
            session.assert_(c.render())
            ans = session.check()
            model = session.get_values([pname(x) for x in prog.variables]) if ans == "sat" else None
            session.pop()
            if ans == "sat":
                witness = {x: int(model[pname(x)]) for x in prog.variables}
                raise UnderflowError(f"assignment {ob.var} := {v} may drop below {lo} (e.g. from state {witness})")
            if ans != "unsat":
                raise UnderflowError(f"could not prove that {ob.var} := {v} stays >= {lo}")


# -- boxes and enumeration ----------------------------------------------------------

def declared_box(prog: A.LoopProgram) -> BoolExpr:
    parts = []
    for d in prog.decls:
        if d.lo:
            parts.append(leq(LinExpr.const(d.lo), LinExpr.var(d.name)))
        if d.bounded:
            parts.append(leq(LinExpr.var(d.name), LinExpr.const(d.hi)))
    return conj(parts)


def is_finite_state(prog: A.LoopProgram) -> bool:
    """All variables bounded and every guard state inside the declared box."""
    if not prog.is_bounded():
        return False
    from ..expectations.normalize import get_checker

    chk = get_checker()
    for c in to_cubes(conj([prog.phi, neg(declared_box(prog))])):
        if chk.simplify(c) is not None:
            return False
    return True


def guard_bounds(prog: A.LoopProgram) -> dict[str, tuple[int, Optional[int]]]:
    """Declared bounds tightened by the single-variable atoms the guard is a conjunction of."""
    out = {d.name: (d.lower, d.hi) for d in prog.decls}
    cubes = to_cubes(prog.phi)
    if len(cubes) == 1:
        for l in cubes[0]:
            b = single_var_bound(l)
            if b is None:
                continue
            kind, x, v = b
            lo, hi = out[x]
            if kind == "hi":
                out[x] = (lo, v if hi is None else min(hi, v))
            else:
                out[x] = (max(lo, v), hi)
    return out


def enumerate_guard_states(prog: A.LoopProgram, cap: int = 10**6) -> list[dict[str, int]]:
    """All states of the finite guard region ``S_phi``.

    The search box is the declared box tightened by the guard's single-variable
    bounds; if that box alone exceeds ``cap`` we refuse rather than scan it.
    """
    bounds = guard_bounds(prog)
    if any(hi is None for _, hi in bounds.values()):
        raise StateSpaceTooLarge("the guard region is not bounded by declarations")
    sizes = [max(0, hi - lo + 1) for lo, hi in bounds.values()]
    total = prod(sizes) if sizes else 1
    if total > cap:
        raise StateSpaceTooLarge(f"{total} candidate states exceed the cap of {cap}")
    names = list(bounds)
    ranges = [range(lo, hi + 1) for lo, hi in bounds.values()]
    cubes = to_cubes(prog.phi)
    out = []
    for values in itertools.product(*ranges):
        s = dict(zip(names, values))
        if any(all(l.evaluate(s) for l in c) for c in cubes):
            out.append(s)
    return out


def guard_state_count_bound(prog: A.LoopProgram) -> Optional[int]:
    bounds = guard_bounds(prog)
    if any(hi is None for _, hi in bounds.values()):
        return None
    return prod(max(0, hi - lo + 1) for lo, hi in bounds.values())


# -- concrete semantics ---------------------------------------------------------------

@lru_cache(maxsize=None)
def expr_lin(e: A.ProgramExpr) -> LinExpr:
    return e.to_lin()


@lru_cache(maxsize=None)
def guard_bool(g: A.Guard) -> BoolExpr:
    return g.to_bool()


def outcomes(s: A.Stmt, state: Mapping[str, int]) -> list[tuple[dict[str, int], Fraction]]:
    """Exact final-state distribution of a loop-free statement (equal states merged)."""
    acc: dict[tuple, Fraction] = {}
    keys = sorted(state)

    def run(stmt, st, p):
        if isinstance(stmt, A.Skip):
            yield st, p
        elif isinstance(stmt, A.Assign):
            v = expr_lin(stmt.expr).evaluate(st)
            if v < 0:
                raise ValueError(f"negative value assigned to {stmt.var} from {st}")
            nxt = dict(st)
            nxt[stmt.var] = int(v)
            yield nxt, p
        elif isinstance(stmt, A.Seq):
            for st1, p1 in run(stmt.first, st, p):
                yield from run(stmt.second, st1, p1)
        elif isinstance(stmt, A.PChoice):
            if stmt.prob != 0:
                yield from run(stmt.left, st, p * stmt.prob)
            if stmt.prob != 1:
                yield from run(stmt.right, st, p * (1 - stmt.prob))
        elif isinstance(stmt, A.Ite):
            branch = stmt.then if guard_bool(stmt.cond).evaluate(st) else stmt.other
            yield from run(branch, st, p)
        else:
            raise TypeError(stmt)

    for st, p in run(s, dict(state), Fraction(1)):
        k = tuple(st[x] for x in keys)
        acc[k] = acc.get(k, Fraction(0)) + p
    return [(dict(zip(keys, k)), p) for k, p in acc.items()]
