"""Explicit-state ground truth for finite loops.

The chain holds every guard state, its exact one-step distribution, and the
frontier of non-guard states it can step into.  Least fixed points are computed
by solving the linear system strongly connected component by component (in
reverse topological order) with sparse rational elimination, after dropping the
states that cannot reach a positive terminal value.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from collections.abc import Mapping
from typing import Iterator

import networkx as nx
from gmpy2 import mpq

from .cegis import Counterexample, violated
from .expectations import LinExpr, Piecewise
from .expectations.boolexpr import conj, eq, to_cubes
from .expectations.normalize import finalize, get_checker
from .expectations.piecewise import INF, Piece
from .pgcl import ast as A
from .pgcl.analysis import StateSpaceTooLarge, enumerate_guard_states, is_finite_state, outcomes
from .smt.queries import INDUCTIVE, SAFE, WELL_DEFINED

State = tuple


class OracleTooLarge(RuntimeError):
    """The loop has more guard states than the configured cap."""


@dataclass
class ExplicitChain:
    variables: tuple[str, ...]
    guard_states: list[State]
    succ: dict[State, list[tuple[State, Fraction]]]
    terminal: dict[State, Fraction] = field(default_factory=dict)   # frontier state -> f(s)

    def as_dict(self, s: State) -> dict[str, int]:
        return dict(zip(self.variables, s))

    def key(self, state: Mapping[str, int]) -> State:
        return tuple(int(state[x]) for x in self.variables)

    def states(self) -> Iterator[State]:
        yield from self.guard_states
        yield from self.terminal

    def transitions(self) -> Iterator[tuple[State, State, Fraction]]:
        for s in self.guard_states:
            for t, p in self.succ[s]:
                yield s, t, p

    def __len__(self) -> int:
        return len(self.guard_states)


def build_chain(loop: A.LoopProgram, f: Piecewise, cap: int = 10**5) -> ExplicitChain:
    if not is_finite_state(loop):
        raise OracleTooLarge("the loop is not finite-state")
    try:
        states = enumerate_guard_states(loop, cap)
    except StateSpaceTooLarge as exc:
        raise OracleTooLarge(str(exc)) from exc
    variables = tuple(loop.variables)
    keys = [tuple(s[x] for x in variables) for s in states]
    inside = set(keys)
    chain = ExplicitChain(variables, keys, {})
    for k, s in zip(keys, states):
        row = []
        for s2, p in outcomes(loop.body, s):
            t = tuple(s2[x] for x in variables)
            row.append((t, p))
            if t not in inside and t not in chain.terminal:
                v = f.evaluate(s2)
                if v is INF:
                    raise ValueError("the oracle needs a finite postexpectation")
                chain.terminal[t] = v
        assert sum(p for _, p in row) == 1, f"probabilities out of {k} do not sum to 1"
        chain.succ[k] = row
    return chain


def _q(x: Fraction):
    return mpq(x.numerator, x.denominator)


def _solve_block(block: list[State], succ: dict, known: dict) -> None:
    """Solve ``V(s) = sum p V(t)`` on one component, every successor outside it already known.

    Arithmetic is done in GMP rationals; values of this size (thousands of
    digits on long chains) make pure-Python gcds the bottleneck.
    """
    zero = mpq(0)
    if len(block) == 1 and all(t != block[0] for t, _ in succ[block[0]]):
        acc = zero
        for t, p in succ[block[0]]:
            v = known.get(t)
            if v is not None:
                acc += p * v
        known[block[0]] = acc
        return
    index = set(block)
    rows: dict = {}
    rhs: dict = {}
    for s in block:
        r = {s: mpq(1)}
        b = zero
        for t, p in succ[s]:
            if t in index:
                r[t] = r.get(t, zero) - p
            else:
                b += p * known.get(t, zero)
        rows[s], rhs[s] = r, b
    order = list(block)
    for i, piv in enumerate(order):
        prow = rows[piv]
        pv = prow.get(piv, Fraction(0))
        assert pv != 0, "singular system after the reachability restriction"
        for s in order[i + 1:]:
            r = rows[s]
            q = r.get(piv)
            if not q:
                continue
            factor = q / pv
            for t, c in prow.items():
                nv = r.get(t, zero) - factor * c
                if nv:
                    r[t] = nv
                else:
                    r.pop(t, None)
            rhs[s] -= factor * rhs[piv]
    for piv in reversed(order):
        prow = rows[piv]
        acc = rhs[piv]
        for t, c in prow.items():
            if t != piv:
                acc -= c * known[t]
        known[piv] = acc / prow[piv]


def exact_lfp(chain: ExplicitChain) -> Mapping[State, Fraction]:
    """Expected terminal value from every guard and frontier state (exact)."""
    graph = nx.DiGraph()
    graph.add_nodes_from(chain.states())
    graph.add_edges_from((s, t) for s, t, _ in chain.transitions())
    targets = [t for t, v in chain.terminal.items() if v != 0]
    relevant: set = set(targets)
    frontier = list(targets)
    while frontier:
        nxt = []
        for t in frontier:
            for s in graph.predecessors(t):
                if s not in relevant:
                    relevant.add(s)
                    nxt.append(s)
        frontier = nxt
    values = {t: _q(v) for t, v in chain.terminal.items()}
    succ = {s: [(t, _q(p)) for t, p in row] for s, row in chain.succ.items() if s in relevant}
    sub = graph.subgraph(s for s in relevant if s not in chain.terminal)
    cond = nx.condensation(sub)
    for c in reversed(list(nx.topological_sort(cond))):
        _solve_block(sorted(cond.nodes[c]["members"]), succ, values)
    return LfpValues(values, list(chain.states()))


class LfpValues(Mapping):
    """State -> exact value; GMP rationals are turned into ``Fraction`` only when read."""

    def __init__(self, raw: dict, states: list):
        self._raw = raw
        self._states = states
        self._known = set(states)

    def __getitem__(self, s: State) -> Fraction:
        if s not in self._raw:
            if s in self._known:
                return Fraction(0)
            raise KeyError(s)
        v = self._raw[s]
        return Fraction(int(v.numerator), int(v.denominator))

    def __iter__(self):
        return iter(self._states)

    def __len__(self) -> int:
        return len(self._states)


def lfp_at(loop: A.LoopProgram, f: Piecewise, state: Mapping[str, int], cap: int = 10**5) -> Fraction:
    """``lfp Phi_f`` at one state (``f`` itself outside the guard)."""
    if not loop.phi.evaluate(state):
        v = f.evaluate(state)
        if v is INF:
            raise ValueError("the oracle needs a finite postexpectation")
        return v
    chain = build_chain(loop, f, cap)
    return exact_lfp(chain)[chain.key(state)]


def pointwise_check(I: Piecewise, chain: ExplicitChain, g: Piecewise):
    """Exhaustive admissibility check of a concrete ``I`` on the guard states and their frontier."""
    if not I.is_concrete():
        raise ValueError("the oracle checks concrete expectations only")
    cache: dict[State, object] = {}

    def val(s: State):
        if s not in cache:
            cache[s] = I.evaluate(chain.as_dict(s))
        return cache[s]

    for s in chain.states():
        st = chain.as_dict(s)
        v = val(s)
        if s in chain.terminal:
            phi_v = chain.terminal[s]
        else:
            phi_v = Fraction(0)
            for t, p in chain.succ[s]:
                w = val(t)
                if w is INF:
                    phi_v = INF
                    break
                phi_v += p * w
        bound = g.evaluate(st)
        for kind in (WELL_DEFINED, INDUCTIVE, SAFE):
            if kind == WELL_DEFINED and v is INF:
                continue
            if violated(kind, v, phi_v, bound):
                return Counterexample(st, kind, v, phi_v, bound)
    return True


def point_cube(variables, s: State):
    (cube,) = to_cubes(conj([eq(LinExpr.var(x), LinExpr.const(v)) for x, v in zip(variables, s)]))
    return cube


def lookup_expectation(loop: A.LoopProgram, f: Piecewise, values: Mapping[State, Fraction],
                       chain: ExplicitChain) -> Piecewise:
    """One piece per guard state carrying its value; ``f`` everywhere outside the guard."""
    cells = [(point_cube(chain.variables, s), LinExpr.const(values.get(s, 0))) for s in chain.guard_states]
    chk = get_checker()
    for oc in to_cubes(loop.phi, positive=False):
        for fc, fb in f.cells():
            c = chk.simplify(oc | fc)
            if c is not None:
                cells.append((c, fb))
    return finalize(cells)


def dump_chain(chain: ExplicitChain, fh) -> None:
    """Sparse text form: one ``src dst p/q`` line per transition, states as comma-joined values."""
    def name(s):
        return ",".join(map(str, s))

    fh.write(f"# variables {','.join(chain.variables)}\n")
    for s, t, p in chain.transitions():
        fh.write(f"{name(s)} {name(t)} {p.numerator}/{p.denominator}\n")
