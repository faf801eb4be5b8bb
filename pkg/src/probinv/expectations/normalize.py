"""Guarded normal form: turning guarded sums into partitions.

Cells are conjunctions of canonical literals.  Empty cells are pruned with a
cheap per-variable interval analysis first and an SMT query only when atoms
over several variables (or template variables) remain.  Cells that carry the same
body and differ in the polarity of a single literal are merged back together.
"""
from __future__ import annotations

from fractions import Fraction
from math import inf
from typing import Iterable, Optional, Sequence, Tuple

from .boolexpr import (
    EMPTY_CUBE,
    Atom,
    BoolExpr,
    Cube,
    cubes_expr,
    lit_neg,
    single_var_bound,
    lt,
    to_cubes,
)
from .linexpr import LinExpr
from .piecewise import ZERO, Body, GuardedSum, Piece, Piecewise, body_add, body_scale


def _range(lin: LinExpr, lo: dict, hi: dict) -> Tuple[float, float]:
    mn = mx = lin.constant()
    for (pv, tv), q in lin.terms.items():
        if pv is None:
            continue
        a, b = lo.get(pv, 0), hi.get(pv, inf)
        if q > 0:
            mn += q * a
            mx = mx + q * b if b != inf else inf
        else:
            mn = mn + q * b if b != inf else -inf
            mx += q * a
    return mn, mx


class CellChecker:
    """Emptiness test and light simplification for cells (over naturals and rationals)."""

    def __init__(self, options=None):
        self.options = options
        self._session = None
        self._cache: dict[Cube, bool] = {}
        self.smt_queries = 0

    def _smt(self):
        from ..smt.session import SmtSession

        if self._session is None or self._session.dead:
            self._session = SmtSession(self.options, label="cells")
        return self._session

    def close(self) -> None:
        if self._session is not None:
            self._session.close()
            self._session = None

    def simplify(self, cube: Cube, smt: bool = True) -> Optional[Cube]:
        """Equivalent cube with redundant bounds removed, or ``None`` when empty.

        With ``smt=False`` only the interval reasoning runs, so ``None`` still
        means empty but a returned cube may be empty too.
        """
        lo: dict[str, int] = {}
        hi: dict[str, int] = {}
        others = []
        for l in cube:
            b = single_var_bound(l)
            if b is None:
                others.append(l)
                continue
            kind, x, v = b
            if kind == "hi":
                hi[x] = min(hi.get(x, v), v)
            else:
                lo[x] = max(lo.get(x, v), v)
        for x in set(lo) | set(hi):
            if lo.get(x, 0) > hi.get(x, inf):
                return None
        kept = []
        tightest: dict[LinExpr, Fraction] = {}
        for l in others:
            if isinstance(l, Atom) and l.integral:
                mn, mx = _range(l.lin, lo, hi)
                if mn >= 0:
                    return None
                if mx < 0:
                    continue
                part, c = l.lin - l.lin.constant(), l.lin.constant()
                if part in tightest:
                    tightest[part] = max(tightest[part], c)
                    continue
                tightest[part] = c
                continue
            kept.append(l)
        for part, c in tightest.items():
            # part + c < 0 together with -part + c2 < 0 leaves no integer when c + c2 >= -1
            c2 = tightest.get(-part)
            if c2 is not None and c + c2 >= -1:
                return None
            kept.append(Atom(part + c))
        out = set(kept)
        for x, v in lo.items():
            if v > 0:
                out.add(lt(LinExpr.const(v - 1) - LinExpr.var(x)))
        for x, v in hi.items():
            out.add(lt(LinExpr.var(x) - (v + 1)))
        res = frozenset(out)
        if smt and kept and self.is_empty_smt(res):
            return None
        return res

    def is_empty(self, cube: Cube) -> bool:
        return self.simplify(cube) is None

    def is_empty_smt(self, cube: Cube) -> bool:
        hit = self._cache.get(cube)
        if hit is not None:
            return hit
        from ..smt.terms import cube_c, declare_for

        s = self._smt()
        c = cube_c(cube)
        declare_for(s, (c.pvars(), c.tvars()))
        s.push()
        s.assert_(c.render())
        self.smt_queries += 1
        ans = s.check()
        if not s.dead:
            s.pop()
        res = ans == "unsat"  # unknown keeps the cell, which is always sound
        self._cache[cube] = res
        return res


_checker: Optional[CellChecker] = None


def get_checker() -> CellChecker:
    global _checker
    if _checker is None:
        from ..smt.session import default_options

        _checker = CellChecker(default_options())
    return _checker


def reset_checker() -> None:
    global _checker
    if _checker is not None:
        _checker.close()
    _checker = None


# -- merging -----------------------------------------------------------------------

def merge_cubes(cubes: Iterable[Cube]) -> list[Cube]:
    """Repeatedly merge pairs ``R & l`` and ``R & !l`` into ``R``."""
    cur = set(cubes)
    changed = True
    while changed:
        changed = False
        index: dict = {}
        for c in sorted(cur, key=lambda c: (len(c), sorted(map(str, c)))):
            for l in c:
                key = (c - {l}, frozenset((l, lit_neg(l))))
                other = index.get(key)
                if other is not None and other != c and other in cur and c in cur:
                    cur.discard(other)
                    cur.discard(c)
                    cur.add(c - {l})
                    changed = True
                    break
                index.setdefault(key, c)
            if changed:
                break
    return sorted(cur, key=lambda c: sorted(map(str, c)))


def finalize(cells: Iterable[Tuple[Cube, Body]]) -> Piecewise:
    by_body: dict = {}
    order: list = []
    for c, b in cells:
        if b not in by_body:
            by_body[b] = []
            order.append(b)
        by_body[b].append(c)
    return Piecewise.make(Piece(tuple(merge_cubes(by_body[b])), b) for b in order)


# -- constructions -------------------------------------------------------------------

def normalize(gs: GuardedSum, checker: CellChecker | None = None) -> Piecewise:
    """Partition equivalent to the guarded sum; provably empty cells are dropped."""
    chk = checker or get_checker()
    if not gs.terms:
        return Piecewise.constant(0)
    if gs.partition:
        cells = []
        for t in gs.terms:
            for c in t.guard:
                s = chk.simplify(c)
                if s is not None:
                    cells.append((s, t.body))
        return finalize(cells)
    cells: list[Tuple[Cube, Body]] = [(EMPTY_CUBE, ZERO)]
    for t in gs.terms:
        comp = to_cubes(cubes_expr(t.guard), positive=False)
        nxt = []
        for c, b in cells:
            for tc in t.guard:
                s = chk.simplify(c | tc)
                if s is not None:
                    nxt.append((s, body_add(b, t.body)))
            for cc in comp:
                s = chk.simplify(c | cc)
                if s is not None:
                    nxt.append((s, b))
        cells = nxt
    return finalize(cells)


def combine(parts: Sequence[Tuple[Fraction, Piecewise]], checker: CellChecker | None = None) -> Piecewise:
    """Weighted sum of partitions, cell by cell (used for probabilistic choice).

    A branch of weight zero contributes nothing, even where it is infinite.
    """
    chk = checker or get_checker()
    cells: list[Tuple[Cube, Body]] = [(EMPTY_CUBE, ZERO)]
    for w, pw in parts:
        if w == 0:
            continue
        nxt = []
        for c, b in cells:
            for pc, pb in pw.cells():
                s = chk.simplify(c | pc)
                if s is not None:
                    nxt.append((s, body_add(b, body_scale(pb, w))))
        cells = nxt
    return finalize(cells)


def select(guard: BoolExpr, then: Piecewise, other: Piecewise, checker: CellChecker | None = None) -> Piecewise:
    """``[guard]*then + [!guard]*other`` for partitions."""
    chk = checker or get_checker()
    cells = []
    for gc in to_cubes(guard, True):
        for pc, pb in then.cells():
            s = chk.simplify(gc | pc)
            if s is not None:
                cells.append((s, pb))
    for gc in to_cubes(guard, False):
        for pc, pb in other.cells():
            s = chk.simplify(gc | pc)
            if s is not None:
                cells.append((s, pb))
    return finalize(cells)


def refine(pw: Piecewise, guard: BoolExpr, checker: CellChecker | None = None) -> list[Tuple[Cube, Body, bool]]:
    """Split every cell of ``pw`` by ``guard``; the flag tells which side a cell fell on."""
    chk = checker or get_checker()
    out = []
    for pc, pb in pw.cells():
        for pos in (True, False):
            for gc in to_cubes(guard, pos):
                s = chk.simplify(pc | gc)
                if s is not None:
                    out.append((s, pb, pos))
    return out
