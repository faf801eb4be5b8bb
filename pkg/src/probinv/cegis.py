"""Counterexample-guided synthesis of template instances.

The synthesizer keeps one incremental solver session and learns one batch of
linear constraints per counterexample state.  The verifier answers, for a
concrete candidate, with a state violating well-definedness, inductivity or
safety (asked in that order).  The cooperative variant first asks for a state at
Manhattan distance at least ``m`` from the previous counterexample and adapts
``m`` by the factor ``d``.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence

from .expectations import LinExpr, Piecewise
from .expectations.boolexpr import Atom, Not, to_cubes
from .expectations.normalize import get_checker
from .expectations.piecewise import INF, value_le
from .pgcl import ast as A
from .smt.motzkin import UniversalImplication, motzkin_encode
from .smt.queries import (
    INDUCTIVE,
    KINDS,
    SAFE,
    WELL_DEFINED,
    Solver,
    admissible_at_state,
    distance_constraint,
    find_state,
    violation_cubes,
)
from .smt.session import SolverOptions, default_options
from .smt.terms import CTRUE, conj_c, declare_for, dnf_c, tname
from .wp import CharFunctional


class Inconclusive(RuntimeError):
    """The solver answered ``unknown`` or a budget ran out."""


@dataclass(frozen=True)
class Counterexample:
    state: Mapping[str, int]
    kind: str
    value: object        # I(s)
    phi_value: object    # Phi_f(I)(s)
    bound: object        # g(s)

    def to_json(self) -> dict:
        return {
            "state": dict(self.state),
            "kind": self.kind,
            "I": str(self.value),
            "Phi": str(self.phi_value),
            "g": str(self.bound),
        }


def violated(kind: str, value, phi_value, bound) -> bool:
    if kind == WELL_DEFINED:
        return value < 0
    if kind == INDUCTIVE:
        return not value_le(phi_value, value)
    return not value_le(value, bound)


@dataclass
class CegisConfig:
    mode: str = "plain"                 # "plain" or "safe"
    cooperative: bool = True
    d: Fraction = Fraction(2)
    m0: Fraction = Fraction(1)
    budget: int = 5000                  # counterexamples
    timeout: Optional[float] = None     # seconds
    options: Optional[SolverOptions] = None
    trace: Optional[Callable[[dict], None]] = None
    recheck: bool = True                # independent re-verification of results
    oracle_cap: int = 10**4

    def __post_init__(self):
        self.d = Fraction(self.d)
        self.m0 = Fraction(self.m0)
        if self.mode not in ("plain", "safe"):
            raise ValueError(f"unknown synthesizer mode {self.mode!r}")
        if self.d <= 1:
            raise ValueError("the distance factor d must exceed 1")
        if self.budget <= 0 or (self.timeout is not None and self.timeout <= 0):
            raise ValueError("budgets must be positive")


# -- verifier -------------------------------------------------------------------

class Verifier:
    """Checks candidates of one loop; one solver session, a fresh frame per query."""

    def __init__(self, loop: A.LoopProgram, f: Piecewise, g: Piecewise,
                 charfun: CharFunctional | None = None, options: SolverOptions | None = None):
        self.loop = loop
        self.f = f
        self.g = g
        self.charfun = charfun or CharFunctional(loop, f)
        self.solver = Solver(options or default_options(), label="verifier", logic="QF_LIA")

    def close(self) -> None:
        self.solver.close()

    def _confirm(self, I: Piecewise, state: Mapping[str, int], kind: str) -> Counterexample:
        value = I.evaluate(state)
        phi_value = self.charfun.value_at(I, state)
        bound = self.g.evaluate(state)
        cex = Counterexample(dict(state), kind, value, phi_value, bound)
        if not violated(kind, value, phi_value, bound):
            raise AssertionError(f"spurious counterexample {cex.to_json()}")
        return cex

    def _query(self, I, psiI, kind, extra=CTRUE):
        c = conj_c([dnf_c(violation_cubes(kind, I, psiI, self.g)), extra])
        return find_state(self.solver, c, self.loop.variables)

    def verify(self, I: Piecewise, psiI: Piecewise | None = None):
        """``True`` when ``I`` is admissible, else a classified :class:`Counterexample`."""
        psiI = psiI if psiI is not None else self.charfun.apply(I)
        for kind in KINDS:
            ans, state = self._query(I, psiI, kind)
            if ans == "sat":
                return self._confirm(I, state, kind)
            if ans != "unsat":
                raise Inconclusive(f"solver returned {ans} on the {kind} query")
        return True

    def cverify(self, I: Piecewise, last: Mapping[str, int], m: Fraction, psiI: Piecewise | None = None):
        """Prefer a counterexample at distance ``>= m`` from ``last``; returns ``(result, achieved)``."""
        psiI = psiI if psiI is not None else self.charfun.apply(I)
        dist = distance_constraint(last, m, self.loop.variables)
        if dist != CTRUE:
            for kind in KINDS:
                ans, state = self._query(I, psiI, kind, dist)
                if ans == "sat":
                    return self._confirm(I, state, kind), True
                if ans != "unsat":
                    raise Inconclusive(f"solver returned {ans} on the distance-constrained {kind} query")
        return self.verify(I, psiI), False


def verify(I: Piecewise, loop: A.LoopProgram, f: Piecewise, g: Piecewise, options: SolverOptions | None = None):
    v = Verifier(loop, f, g, options=options)
    try:
        return v.verify(I)
    finally:
        v.close()


def cverify(I: Piecewise, loop: A.LoopProgram, f: Piecewise, g: Piecewise, last: Mapping[str, int],
            m: Fraction, options: SolverOptions | None = None):
    v = Verifier(loop, f, g, options=options)
    try:
        return v.cverify(I, last, Fraction(m))
    finally:
        v.close()


# -- synthesizer ----------------------------------------------------------------

class NotApplicable(ValueError):
    """The requested synthesizer does not support this template."""


def _region_rows(cube, variables: Sequence[str]) -> list[LinExpr]:
    """Rows ``lin <= 0`` describing a fixed-partition cell over the naturals."""
    rows = [-LinExpr.var(x) for x in variables]
    for l in cube:
        if isinstance(l, Atom) and l.integral:
            rows.append(l.lin + 1)  # integer coefficients: lin < 0 iff lin + 1 <= 0
        else:
            raise NotApplicable("safe synthesis needs template-free guards")
    return rows


class Synthesizer:
    """Finds valuations admissible on the counterexample states learned so far."""

    def __init__(self, T: Piecewise, psiT: Piecewise, g: Piecewise, loop: A.LoopProgram,
                 mode: str = "plain", options: SolverOptions | None = None):
        self.T = T
        self.psiT = psiT
        self.g = g
        self.loop = loop
        self.mode = mode
        self.tvars = sorted(T.tvars())
        self.states: list[dict] = []
        self.infeasible = False
        self.solver = Solver(options or default_options(), label=f"synth-{mode}", logic=None)
        s = self.solver.session
        for a in self.tvars:
            s.declare(tname(a), "Real")
        if mode == "safe":
            self._add_safe_constraints()

    def close(self) -> None:
        self.solver.close()

    def _assert(self, c) -> None:
        s = self.solver.session
        if c == CTRUE:
            return
        declare_for(s, (set(), c.tvars()))
        s.assert_(c.render())

    def _add_safe_constraints(self) -> None:
        if not self.T.is_fixed_partition():
            raise NotApplicable("safe synthesis applies to fixed-partition templates only")
        variables = self.loop.variables
        chk = get_checker()
        for k, (cube, body) in enumerate(self.T.cells()):
            if not body.has_tvars():
                # constant piece: check it exactly, no multipliers needed
                single = Piecewise.make([_piece(cube, body)])
                wd = violation_cubes(WELL_DEFINED, single)
                sf = violation_cubes(SAFE, single, None, self.g)
                for cubes in (wd, sf):
                    ans, _ = find_state(self.solver, dnf_c(cubes), variables)
                    if ans == "sat":
                        self.infeasible = True
                    elif ans != "unsat":
                        raise Inconclusive("solver returned unknown on a constant piece")
                continue
            rows = _region_rows(cube, variables)
            self._assert(motzkin_encode(UniversalImplication(tuple(rows), (), -body), prefix=f"mzw{k}"))
            for j, (cg, bg) in enumerate(self.g.cells()):
                if bg is INF or chk.simplify(cube | cg) is None:
                    continue
                grow = rows + _region_rows(cg, [])
                self._assert(motzkin_encode(UniversalImplication(tuple(grow), (), body - bg), prefix=f"mzs{k}_{j}"))

    def add(self, state: Mapping[str, int]) -> None:
        if state in self.states:
            raise AssertionError(f"counterexample {dict(state)} repeated; the synthesizer is unsound")
        self.states.append(dict(state))
        self._assert(admissible_at_state(self.T, self.psiT, self.g, state))

    def solve(self) -> Optional[dict]:
        """A valuation, or ``None`` when no instance is admissible on the learned states."""
        if self.infeasible:
            return None
        s = self.solver.session
        ans = s.check()
        if ans == "unsat":
            return None
        if ans != "sat":
            raise Inconclusive(f"synthesizer solver returned {ans}")
        if not self.tvars:
            return {}
        model = s.get_values([tname(a) for a in self.tvars])
        return {a: Fraction(model[tname(a)]) for a in self.tvars}


def _piece(cube, body):
    from .expectations.piecewise import Piece

    return Piece((cube,), body)


def synthesize_plain(T, psiT, g, loop, states, options=None):
    syn = Synthesizer(T, psiT, g, loop, "plain", options)
    try:
        for s in states:
            syn.add(s)
        return syn.solve()
    finally:
        syn.close()


def synthesize_safe(T, psiT, g, loop, states, options=None):
    syn = Synthesizer(T, psiT, g, loop, "safe", options)
    try:
        for s in states:
            syn.add(s)
        return syn.solve()
    finally:
        syn.close()


# -- the loop -------------------------------------------------------------------

@dataclass
class CegisResult:
    status: str                                   # "invariant" | "no-instance" | "inconclusive"
    invariant: Optional[Piecewise] = None
    valuation: Optional[dict] = None
    counterexamples: list = field(default_factory=list)
    candidates: list = field(default_factory=list)
    last_candidate: Optional[Piecewise] = None
    last_psi: Optional[Piecewise] = None
    message: str = ""
    seconds: float = 0.0

    @property
    def n_cex(self) -> int:
        return len(self.counterexamples)


def _fmt_val(val: Mapping[str, Fraction]) -> dict:
    return {k: str(v) for k, v in sorted(val.items())}


def cegis(T: Piecewise, loop: A.LoopProgram, f: Piecewise, g: Piecewise,
          config: CegisConfig | None = None, charfun: CharFunctional | None = None) -> CegisResult:
    """Synthesize an admissible instance of ``T`` or show that none exists."""
    config = config or CegisConfig()
    options = config.options or default_options()
    charfun = charfun or CharFunctional(loop, f)
    start = time.monotonic()
    psiT = charfun.apply(T)
    res = CegisResult("inconclusive")
    emit = config.trace or (lambda rec: None)
    m = config.m0
    last = None
    synth = verifier = None
    try:
        synth = Synthesizer(T, psiT, g, loop, config.mode, options)
        verifier = Verifier(loop, f, g, charfun, options)
        while True:
            if res.n_cex >= config.budget:
                res.message = f"counterexample budget {config.budget} exhausted"
                break
            if config.timeout is not None and time.monotonic() - start > config.timeout:
                res.message = f"timeout after {config.timeout} s"
                break
            val = synth.solve()
            if val is None:
                res.status = "no-instance"
                emit({"event": "no-instance", "cex": res.n_cex, "t": time.monotonic() - start})
                break
            I = T.instantiate(val)
            psiI = psiT.instantiate(val)
            res.candidates.append(val)
            res.last_candidate, res.last_psi = I, psiI
            achieved = None
            if config.cooperative and last is not None:
                r, achieved = verifier.cverify(I, last, m, psiI)
                m = m * config.d if achieved else m / config.d
            else:
                r = verifier.verify(I, psiI)
            rec = {"event": "candidate", "iteration": len(res.candidates), "valuation": _fmt_val(val),
                   "m": str(m), "t": round(time.monotonic() - start, 6)}
            if r is True:
                rec["verdict"] = "admissible"
                emit(rec)
                res.status, res.invariant, res.valuation = "invariant", I, val
                break
            if config.mode == "safe" and r.kind != INDUCTIVE:
                raise AssertionError(f"safe-mode candidate violates {r.kind} at {dict(r.state)}")
            rec.update({"verdict": "counterexample", "counterexample": r.to_json(), "distance_achieved": achieved})
            emit(rec)
            res.counterexamples.append(r)
            synth.add(r.state)
            last = r.state
    except Inconclusive as exc:
        res.status = "inconclusive"
        res.message = str(exc)
    finally:
        if synth is not None:
            synth.close()
        if verifier is not None:
            verifier.close()
    res.seconds = time.monotonic() - start
    if res.status == "invariant" and config.recheck:
        recheck_invariant(res.invariant, loop, f, g, options, config.oracle_cap)
    return res


def recheck_invariant(I: Piecewise, loop, f, g, options=None, oracle_cap: int = 10**4) -> None:
    """Fresh-session re-verification plus, for small finite loops, an exhaustive pointwise check."""
    again = verify(I, loop, f, g, options)
    if again is not True:
        raise AssertionError(f"re-verification failed: {again.to_json()}")
    from .oracle import OracleTooLarge, build_chain, pointwise_check
    from .pgcl.analysis import is_finite_state

    if is_finite_state(loop):
        try:
            chain = build_chain(loop, f, cap=oracle_cap)
        except OracleTooLarge:
            return
        verdict = pointwise_check(I, chain, g)
        if verdict is not True:
            raise AssertionError(f"oracle disagrees with the verifier: {verdict.to_json()}")


class TraceWriter:
    """JSON-lines trace sink."""

    def __init__(self, path):
        self.fh = open(path, "a")

    def __call__(self, rec: dict) -> None:
        self.fh.write(json.dumps(rec, sort_keys=True) + "\n")
        self.fh.flush()

    def close(self) -> None:
        self.fh.close()
