"""The constraint shapes the toolkit sends to the solver.

Verifier side: existential queries over natural-valued program variables asking
for a state where a concrete candidate is negative, not inductive, or unsafe.
Synthesizer side: per-state admissibility constraints over template variables,
and the one-shot query that quantifies over every guard state at once.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil
from typing import Iterable, Mapping, Optional, Sequence

from ..expectations.boolexpr import EMPTY_CUBE, Cube, lt, to_cubes
from ..expectations.linexpr import LinExpr
from ..expectations.normalize import get_checker
from ..expectations.piecewise import INF, Body, Piecewise
from .session import SmtSession, SolverOptions, default_options
from .terms import (
    CFALSE,
    CRaw,
    CTRUE,
    CImplies,
    Constraint,
    conj_c,
    cube_c,
    declare_for,
    disj_c,
    dnf_c,
    le_c,
    pname,
    tname,
)

WELL_DEFINED = "well-definedness"
INDUCTIVE = "inductivity"
SAFE = "safety"
KINDS = (WELL_DEFINED, INDUCTIVE, SAFE)


class Solver:
    """A lazily (re)started solver session for one role."""

    def __init__(self, options: SolverOptions | None = None, label: str = "query", logic: str | None = None):
        self.options = options or default_options()
        self.label = label
        self.logic = logic
        self._session: Optional[SmtSession] = None
        self.queries = 0

    @property
    def session(self) -> SmtSession:
        if self._session is None or self._session.dead:
            self._session = SmtSession(self.options, logic=self.logic, label=self.label)
        return self._session

    def check(self, c: Constraint, pvars: Iterable[str] = (), tvars: Iterable[str] = (),
              want: Sequence[str] = ()) -> tuple[str, dict]:
        """Check ``c`` in a fresh frame; on sat return values of ``want`` (solver names)."""
        s = self.session
        declare_for(s, (c.pvars() | set(pvars), c.tvars() | set(tvars)))
        s.push()
        s.assert_(c.render())
        self.queries += 1
        ans = s.check()
        model = {}
        if ans == "sat" and want:
            model = s.get_values(want)
        if not s.dead:
            s.pop()
        return ans, model

    def close(self) -> None:
        if self._session is not None:
            self._session.close()
            self._session = None


def solve(c: Constraint, options: SolverOptions | None = None) -> tuple[str, dict]:
    """One-off check; the model maps plain variable names to exact values."""
    solver = Solver(options, label="solve")
    try:
        pv, tv = sorted(c.pvars()), sorted(c.tvars())
        ans, model = solver.check(c, want=[pname(x) for x in pv] + [tname(a) for a in tv])
        out = {x: model[pname(x)] for x in pv if pname(x) in model}
        out.update({a: model[tname(a)] for a in tv if tname(a) in model})
        return ans, out
    finally:
        solver.close()


# -- verifier side ----------------------------------------------------------------

def _union(cubes_a: Iterable[Cube], cube_b: Cube, atom) -> list[Cube]:
    chk = get_checker()
    out = []
    for extra in to_cubes(atom):
        for a in cubes_a:
            s = chk.simplify(a | cube_b | extra, smt=False)
            if s is not None:
                out.append(s)
    return out


def violation_cubes(kind: str, I: Piecewise, psiI: Piecewise | None = None, g: Piecewise | None = None) -> list[Cube]:
    """Cubes over program variables whose states violate one condition for ``I``."""
    out: list[Cube] = []
    if kind == WELL_DEFINED:
        for c, b in I.cells():
            out += _union([c], EMPTY_CUBE, lt(b))
    elif kind == INDUCTIVE:
        for cI, bI in I.cells():
            for cP, bP in psiI.cells():
                out += _union([cI], cP, lt(bI - bP))
    elif kind == SAFE:
        for cI, bI in I.cells():
            for cg, bg in g.cells():
                if bg is INF:
                    continue
                out += _union([cI], cg, lt(bg - bI))
    else:
        raise ValueError(kind)
    return out


def verifier_query(I: Piecewise, psiI: Piecewise, g: Piecewise, kind: str | None = None) -> Constraint:
    """States violating ``0 <= I``, ``Phi_f(I) <= I`` or ``I <= g`` (one kind, or any)."""
    if not I.is_concrete() or not psiI.is_concrete():
        raise ValueError("the verifier needs a concrete candidate")
    kinds = KINDS if kind is None else (kind,)
    return disj_c(dnf_c(violation_cubes(k, I, psiI, g)) for k in kinds)


def distance_constraint(last: Mapping[str, int], m: Fraction, variables: Sequence[str]) -> Constraint:
    """Manhattan distance from ``last`` at least ``m`` (absolute values via ``ite``)."""
    bound = ceil(m)
    if bound <= 0:
        return CTRUE
    terms = []
    for x in variables:
        c = int(last[x])
        px = pname(x)
        terms.append(f"(ite (>= {px} {c}) (- {px} {c}) (- {c} {px}))")
    total = terms[0] if len(terms) == 1 else "(+ " + " ".join(terms) + ")"

    def fn(state, _val, last=dict(last), bound=bound):
        return sum(abs(state[x] - last[x]) for x in variables) >= bound

    return CRaw(f"(>= {total} {bound})", frozenset(variables), frozenset(), fn)


def manhattan(a: Mapping[str, int], b: Mapping[str, int]) -> int:
    return sum(abs(a[x] - b[x]) for x in a)


def find_state(solver: Solver, c: Constraint, variables: Sequence[str]) -> tuple[str, Optional[dict]]:
    if c == CFALSE:
        return "unsat", None
    ans, model = solver.check(c, pvars=variables, want=[pname(x) for x in variables])
    if ans != "sat":
        return ans, None
    return ans, {x: int(model[pname(x)]) for x in variables}


def check_well_defined(I: Piecewise, options: SolverOptions | None = None, variables: Sequence[str] | None = None):
    """``True`` when ``I`` is nonnegative everywhere, else a witness state (or ``"unknown"``)."""
    variables = sorted(variables or I.pvars())
    solver = Solver(options, label="welldef")
    try:
        ans, state = find_state(solver, dnf_c(violation_cubes(WELL_DEFINED, I)), variables)
    finally:
        solver.close()
    if ans == "unsat":
        return True
    if ans == "sat":
        return state
    return "unknown"


# -- synthesizer side -------------------------------------------------------------

def implies_c(a: Constraint, b: Constraint) -> Constraint:
    if a == CTRUE:
        return b
    if a == CFALSE or b == CTRUE:
        return CTRUE
    return CImplies(a, b)


def cases_at(pw: Piecewise, state: Mapping[str, int]) -> list[tuple[Cube, Body]]:
    """``T(s)`` as (template-variable cube, body) cases; one case for fixed partitions."""
    if pw.is_fixed_partition():
        b = pw.piece_at(state).body
        return [(EMPTY_CUBE, b if b is INF else b.at_state(state))]
    return pw.at_state(state)


def admissible_at_state(T: Piecewise, psiT: Piecewise, g: Piecewise, state: Mapping[str, int]) -> Constraint:
    """``0 <= T(s)``, ``Psi_f(T)(s) <= T(s)`` and ``T(s) <= g(s)`` over template variables.

    The safety conjunct disappears where ``g(s)`` is infinite.
    """
    gs = g.evaluate(state)
    zero = LinExpr()
    parts = []
    psi_cases = cases_at(psiT, state)
    for tc, tb in cases_at(T, state):
        if tb is INF:
            raise ValueError("templates carry finite bodies only")
        items = [le_c(zero, tb)]
        for pc, pb in psi_cases:
            items.append(implies_c(cube_c(pc), le_c(pb, tb)))
        if gs is not INF:
            items.append(le_c(tb, LinExpr.const(gs)))
        parts.append(implies_c(cube_c(tc), conj_c(items)))
    return conj_c(parts)


def _forall_region(T: Piecewise, psiT: Piecewise, g: Piecewise, guard_cubes: list[Cube]) -> Constraint:
    """Quantifier-free matrix of the one-shot query (program variables left free)."""
    zero = LinExpr()
    parts = []
    for cT, bT in T.cells():
        items = [le_c(zero, bT)]
        for cP, bP in psiT.cells():
            items.append(implies_c(cube_c(cP), le_c(bP, bT)))
        for cg, bg in g.cells():
            if bg is not INF:
                items.append(implies_c(cube_c(cg), le_c(bT, bg)))
        parts.append(implies_c(cube_c(cT), conj_c(items)))
    return implies_c(dnf_c(guard_cubes), conj_c(parts))


@dataclass
class OneShotResult:
    status: str                       # "sat" | "unsat" | "unknown" | "refused"
    valuation: Optional[dict] = None
    message: str = ""
    conjuncts: int = 0
    stats: dict = field(default_factory=dict)


def terminal_safe(loop, f: Piecewise, g: Piecewise, options: SolverOptions | None = None) -> bool | str:
    """``f <= g`` outside the guard; otherwise no natural template can be safe."""
    from ..expectations.boolexpr import neg

    outside = to_cubes(neg(loop.phi))
    cubes = []
    for cf, bf in f.cells():
        for cg, bg in g.cells():
            if bg is INF:
                continue
            for o in outside:
                cubes += _union([cf], cg | o, lt(bg - bf))
    solver = Solver(options, label="terminal")
    try:
        ans, _ = find_state(solver, dnf_c(cubes), loop.variables)
    finally:
        solver.close()
    if ans == "unknown":
        return "unknown"
    return ans == "unsat"


def one_shot(T: Piecewise, psiT: Piecewise, g: Piecewise, loop, f: Piecewise | None = None,
             cap: int = 10**6, options: SolverOptions | None = None, finite: bool | None = None) -> OneShotResult:
    """Solve the whole instantiation problem with a single query.

    Finite guard regions are expanded state by state into a quantifier-free
    conjunction over the reals.  Infinite ones become one universally quantified
    formula; the solver may legitimately answer ``unknown`` there.
    """
    from ..pgcl.analysis import StateSpaceTooLarge, enumerate_guard_states, is_finite_state

    tvars = sorted(T.tvars())
    if f is not None:
        ok = terminal_safe(loop, f, g, options)
        if ok == "unknown":
            return OneShotResult("unknown", message="could not decide f <= g outside the guard")
        if not ok:
            return OneShotResult("unsat", message="f exceeds g on a terminal state")
    if finite is None:
        finite = is_finite_state(loop)
    solver = Solver(options, label="oneshot", logic=None)
    try:
        s = solver.session
        for a in tvars:
            s.declare(tname(a), "Real")
        if finite:
            try:
                states = enumerate_guard_states(loop, cap)
            except StateSpaceTooLarge as exc:
                return OneShotResult("refused", message=f"{exc}; use CEGIS mode instead")
            for st in states:
                c = admissible_at_state(T, psiT, g, st)
                declare_for(s, (set(), c.tvars()))
                if c == CTRUE:
                    continue
                s.assert_(c.render())
            n = len(states)
        else:
            matrix = _forall_region(T, psiT, g, to_cubes(loop.phi))
            for a in matrix.tvars():
                s.declare(tname(a), "Real")
            binders = " ".join(f"({pname(x)} Int)" for x in loop.variables)
            nonneg = " ".join(f"(>= {pname(x)} 0)" for x in loop.variables)
            s.assert_(f"(forall ({binders}) (=> (and true {nonneg}) {matrix.render()}))")
            n = 1
        ans = s.check()
        if ans == "sat":
            model = s.get_values([tname(a) for a in tvars]) if tvars else {}
            val = {a: Fraction(model[tname(a)]) for a in tvars}
            return OneShotResult("sat", val, conjuncts=n)
        return OneShotResult(ans, conjuncts=n)
    finally:
        solver.close()


# -- partition checks ------------------------------------------------------------

def check_partition(pw: Piecewise, variables: Sequence[str] | None = None,
                    options: SolverOptions | None = None) -> tuple[bool, str]:
    """SMT check that, for every valuation, exactly one piece holds at every state."""
    variables = sorted(variables or pw.pvars())
    guards = [dnf_c(p.guard) for p in pw.pieces]
    solver = Solver(options, label="partition")
    try:
        if len(guards) > 1:
            count = " ".join(f"(ite {g.render()} 1 0)" for g in guards)
            pv = set().union(*(g.pvars() for g in guards)) | set(variables)
            tv = set().union(*(g.tvars() for g in guards))
            overlap = CRaw(f"(>= (+ {count}) 2)", frozenset(pv), frozenset(tv))
            ans, model = solver.check(overlap, want=[pname(x) for x in sorted(pv)])
            if ans != "unsat":
                return False, f"pieces overlap ({ans})"
        from .terms import CNot

        cover = CNot(disj_c(guards)) if guards else CTRUE
        ans, _ = solver.check(cover, pvars=variables)
        if ans != "unsat":
            return False, f"pieces do not cover every state ({ans})"
        return True, "ok"
    finally:
        solver.close()
