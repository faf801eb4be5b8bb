"""Templates and the refine-and-retry outer loop.

A template over a loop is *natural*: outside the guard it equals the
postexpectation verbatim, inside the guard every cell carries its own affine body
with fresh template variables.  Refinement only ever changes how the guard region
is cut into cells.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .cegis import CegisConfig, CegisResult, cegis
from .expectations import LinExpr, Piecewise
from .expectations.boolexpr import Cube, conj, leq, less, to_cubes
from .expectations.normalize import finalize, get_checker
from .expectations.piecewise import INF, Piece
from .pgcl import ast as A
from .pgcl.analysis import is_finite_state, path_conditions
from .wp import CharFunctional

STRATEGIES = ("static", "dynamic", "inductivity")


class StrategyInapplicable(ValueError):
    """The chosen refinement strategy cannot be used on this loop."""


def _outside_cells(loop: A.LoopProgram, f: Piecewise) -> list[tuple[Cube, object]]:
    chk = get_checker()
    out = []
    for oc in to_cubes(loop.phi, positive=False):
        for fc, fb in f.cells():
            s = chk.simplify(oc | fc)
            if s is not None:
                out.append((s, fb))
    return out


def _assemble(loop: A.LoopProgram, f: Piecewise, groups: Iterable[Sequence[Cube]], tag: str) -> Piecewise:
    """One fresh affine body per group of guard-region cubes, ``f`` on the rest."""
    variables = loop.variables
    pieces = []
    k = 0
    for group in groups:
        group = tuple(group)
        if not group:
            continue
        body = LinExpr.affine_template(variables, f"{tag}{k}")
        k += 1
        pieces.append(Piece(group, body))
    outside = finalize(_outside_cells(loop, f))
    return Piecewise.make(pieces + list(outside.pieces))


def base_groups(loop: A.LoopProgram) -> list[list[Cube]]:
    """The guard region cut by every branch condition of the body.

    Conditions of different paths may overlap (a path through a probabilistic
    choice can skip a conditional that another path takes), so each region is
    split by each condition in turn; a group is one region, given as cubes.
    """
    chk = get_checker()

    def keep(cubes):
        out = []
        for c in cubes:
            s = chk.simplify(c)
            if s is not None:
                out.append(s)
        return out

    groups = [keep(to_cubes(loop.phi))]
    for cond in path_conditions(loop.body, loop.variables):
        nxt = []
        for group in groups:
            for positive in (True, False):
                side = keep([c | d for c in group for d in to_cubes(cond, positive)])
                if side:
                    nxt.append(side)
        groups = nxt
    return [g for g in groups if g]


def initial_template(loop: A.LoopProgram, f: Piecewise) -> Piecewise:
    return _assemble(loop, f, base_groups(loop), "a")


def template_pieces(T: Piecewise) -> int:
    """Number of pieces carrying template variables (the pieces over the guard)."""
    return sum(1 for p in T.pieces if p.body is not INF and p.body.has_tvars())


def is_natural(T: Piecewise, loop: A.LoopProgram, f: Piecewise) -> bool:
    """``[!phi]*T`` coincides with ``[!phi]*f`` (checked cell by cell, exactly)."""
    from .smt.queries import Solver, find_state
    from .smt.terms import dnf_c
    from .expectations.boolexpr import lt

    chk = get_checker()
    bad: list[Cube] = []
    for oc in to_cubes(loop.phi, positive=False):
        for tc, tb in T.cells():
            for fc, fb in f.cells():
                s = chk.simplify(oc | tc | fc)
                if s is None:
                    continue
                if tb == fb:
                    continue
                if tb is INF or fb is INF or tb.has_tvars():
                    return False
                for atom in (lt(tb - fb), lt(fb - tb)):
                    for extra in to_cubes(atom):
                        s2 = chk.simplify(s | extra)
                        if s2 is not None:
                            bad.append(s2)
    if not bad:
        return True
    solver = Solver(label="natural")
    try:
        ans, _ = find_state(solver, dnf_c(bad), loop.variables)
    finally:
        solver.close()
    return ans == "unsat"


# -- static ----------------------------------------------------------------------

def split_interval(lo: int, hi: int, parts: int) -> list[tuple[int, int]]:
    """``[lo, hi]`` cut into ``min(parts, size)`` left-closed near-equal integer intervals."""
    size = hi - lo + 1
    n = max(1, min(parts, size))
    cuts = [lo + (k * size) // n for k in range(n + 1)]
    return [(cuts[k], cuts[k + 1] - 1) for k in range(n)]


def _range_cube(x: str, lo: Optional[int], hi: Optional[int]) -> list[Cube]:
    parts = []
    if lo is not None:
        parts.append(leq(LinExpr.const(lo), LinExpr.var(x)))
    if hi is not None:
        parts.append(leq(LinExpr.var(x), LinExpr.const(hi)))
    return to_cubes(conj(parts))


def refine_static(loop: A.LoopProgram, f: Piecewise, i: int) -> Piecewise:
    """Cut the declared box into ``i`` parts per dimension (fewer where a dimension is smaller)."""
    if not loop.is_bounded():
        unbounded = [d.name for d in loop.decls if not d.bounded]
        raise StrategyInapplicable(f"static refinement needs bounded variables; unbounded: {', '.join(unbounded)}")
    per_var = []
    for d in loop.decls:
        ivs = split_interval(d.lo, d.hi, i)
        cubes = []
        for k, (a, b) in enumerate(ivs):
            # the outermost intervals stay open so the rectangles cover every state
            lo = a if k > 0 else None
            hi = b if k < len(ivs) - 1 else None
            cubes += _range_cube(d.name, lo, hi)
        per_var.append(cubes)
    return _assemble(loop, f, _cross(base_groups(loop), per_var), f"s{i}_")


def _cross(groups: list[list[Cube]], per_var: list[list[Cube]]) -> list[list[Cube]]:
    chk = get_checker()
    out = []
    for group in groups:
        for combo in itertools.product(*per_var):
            extra = frozenset().union(*combo) if combo else frozenset()
            cells = []
            for c in group:
                s = chk.simplify(c | extra)
                if s is not None:
                    cells.append(s)
            if cells:
                out.append(cells)
    return out


# -- dynamic ---------------------------------------------------------------------

def boundary_chain(x: str, names: Sequence[str]) -> list[Cube]:
    """Cells ``x <= d1``, ``d1 < x & x <= d2``, ..., ``d1 < x & ... & dn < x``.

    Each later cell repeats every earlier ``d < x``, so the cells are disjoint and
    cover the line whatever order the boundaries take.
    """
    xv = LinExpr.var(x)
    out = []
    above: list = []
    for d in names:
        out += to_cubes(conj(above + [leq(xv, LinExpr.tvar(d))]))
        above.append(less(LinExpr.tvar(d), xv))
    out += to_cubes(conj(above))
    return out


def refine_dynamic(loop: A.LoopProgram, f: Piecewise, round_: int) -> Piecewise:
    """Round ``r`` uses ``r - 1`` boundary variables per program variable; round 1 is the initial template."""
    if round_ <= 1:
        return initial_template(loop, f)
    per_var = [boundary_chain(x, [f"d{round_}_{x}_{j}" for j in range(1, round_)]) for x in loop.variables]
    return _assemble(loop, f, _cross_plain(base_groups(loop), per_var), f"v{round_}_")


def _cross_plain(groups, per_var):
    out = []
    for group in groups:
        for combo in itertools.product(*per_var):
            extra = frozenset().union(*combo) if combo else frozenset()
            out.append([c | extra for c in group])
    return out


# -- inductivity -----------------------------------------------------------------

def refine_inductivity(T: Piecewise, last_I: Piecewise, psi_last: Piecewise, loop: A.LoopProgram,
                       f: Piecewise, tag: str = "i") -> Piecewise:
    """Split each guard cell by where the last candidate was inductive and where it was not."""
    if not T.is_fixed_partition():
        raise StrategyInapplicable("inductivity refinement needs a fixed-partition template")
    chk = get_checker()
    groups = []
    for bj, body in T.cells():
        if not body.has_tvars():
            continue
        for ck, dk in psi_last.cells():
            for bp, ep in last_I.cells():
                for side in (leq(dk, ep), less(ep, dk)):
                    for sc in to_cubes(side):
                        s = chk.simplify(bj | ck | bp | sc)
                        if s is not None:
                            groups.append([s])
    return _assemble(loop, f, groups, tag)


# -- outer loop ------------------------------------------------------------------

@dataclass
class RoundRecord:
    round: int
    strategy: str
    pieces: int
    result: CegisResult
    note: str = ""

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "strategy": self.strategy,
            "pieces": self.pieces,
            "status": self.result.status,
            "counterexamples": self.result.n_cex,
            "seconds": round(self.result.seconds, 6),
            "note": self.note,
        }


@dataclass
class OuterResult:
    status: str                          # "invariant" | "exhausted" | "inconclusive"
    invariant: Optional[Piecewise] = None
    template: Optional[Piecewise] = None
    rounds: list = field(default_factory=list)
    message: str = ""
    seconds: float = 0.0

    @property
    def counterexamples(self) -> int:
        return sum(r.result.n_cex for r in self.rounds)


@dataclass
class OuterConfig:
    strategy: str = "inductivity"
    round_cap: int = 8
    timeout: Optional[float] = None
    cegis: CegisConfig = field(default_factory=CegisConfig)
    on_template: Optional[Callable[[int, Piecewise], None]] = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; pick one of {', '.join(STRATEGIES)}")
        if self.round_cap < 1:
            raise ValueError("the round cap must be at least 1")


def check_applicable(loop: A.LoopProgram, config: OuterConfig) -> None:
    if config.strategy == "static" and not is_finite_state(loop):
        raise StrategyInapplicable("static refinement needs a finite-state loop (bounded variables, guard inside the box)")
    if config.strategy == "dynamic" and config.cegis.mode == "safe":
        raise StrategyInapplicable("safe synthesis does not support the variable-partition templates of dynamic refinement")


def _fallback(loop, f, round_, fixed_only: bool):
    if is_finite_state(loop):
        return refine_static(loop, f, round_), "fallback: static"
    if fixed_only:
        raise StrategyInapplicable("no candidate to guide the inductivity split, and the variable-partition "
                                   "fallback is unavailable to the safe synthesizer")
    return refine_dynamic(loop, f, round_), "fallback: dynamic"


def next_template(strategy: str, loop, f, round_: int, prev: Piecewise, prev_result: CegisResult | None,
                  fixed_only: bool = False):
    """Template for round ``round_`` (2, 3, ...) plus a note on how it was obtained."""
    if strategy == "static":
        return refine_static(loop, f, round_), ""
    if strategy == "dynamic":
        return refine_dynamic(loop, f, round_), ""
    if prev_result is None or prev_result.last_candidate is None or not prev.is_fixed_partition():
        return _fallback(loop, f, round_, fixed_only)
    T = refine_inductivity(prev, prev_result.last_candidate, prev_result.last_psi, loop, f, f"i{round_}_")
    if template_pieces(T) <= template_pieces(prev):
        try:
            T2, note = _fallback(loop, f, round_, fixed_only)
        except StrategyInapplicable:
            return T, ""
        if template_pieces(T2) > template_pieces(prev):
            return T2, note + " (inductivity split added no piece)"
    return T, ""


def outer_loop(loop: A.LoopProgram, f: Piecewise, g: Piecewise, config: OuterConfig | None = None,
               template: Piecewise | None = None) -> OuterResult:
    config = config or OuterConfig()
    check_applicable(loop, config)
    start = time.monotonic()
    charfun = CharFunctional(loop, f)
    T = template or initial_template(loop, f)
    out = OuterResult("exhausted")
    note = "initial"
    for rnd in range(1, config.round_cap + 1):
        if config.on_template is not None:
            config.on_template(rnd, T)
        cfg = config.cegis
        if config.timeout is not None:
            left = config.timeout - (time.monotonic() - start)
            if left <= 0:
                out.status, out.message = "inconclusive", f"timeout after {config.timeout} s"
                break
            cfg = _with_timeout(cfg, left if cfg.timeout is None else min(cfg.timeout, left))
        res = cegis(T, loop, f, g, cfg, charfun)
        out.rounds.append(RoundRecord(rnd, config.strategy, template_pieces(T), res, note))
        out.template = T
        if res.status == "invariant":
            out.status, out.invariant = "invariant", res.invariant
            break
        if res.status == "inconclusive":
            out.status, out.message = "inconclusive", res.message
            break
        if rnd == config.round_cap:
            out.message = f"no admissible instance within {config.round_cap} rounds"
            break
        try:
            T, note = next_template(config.strategy, loop, f, rnd + 1, T, res, config.cegis.mode == "safe")
        except StrategyInapplicable as exc:
            out.message = f"stopped after round {rnd}: {exc}"
            break
    out.seconds = time.monotonic() - start
    return out


def _with_timeout(cfg: CegisConfig, t: float) -> CegisConfig:
    from dataclasses import replace

    return replace(cfg, timeout=t)
