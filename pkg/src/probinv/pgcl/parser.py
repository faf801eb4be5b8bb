"""Text to syntax trees for programs and property expectations."""
from __future__ import annotations

from fractions import Fraction
from importlib import resources
from typing import Optional

import lark
from lark import Lark, Token, Transformer, v_args

from ..expectations.boolexpr import FALSE, TRUE, BoolExpr, conj, disj, less, leq, neg
from ..expectations.linexpr import LinExpr
from . import ast as A


class PgclError(ValueError):
    """Any rejection of program or property text."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class PgclSyntaxError(PgclError):
    pass


class UndeclaredVariable(PgclError):
    pass


class ProbabilityError(PgclError):
    pass


class UnderflowError(PgclError):
    pass


class ExpectationError(PgclError):
    pass


_PARSER: Optional[Lark] = None


def _parser() -> Lark:
    global _PARSER
    if _PARSER is None:
        text = resources.files(__package__).joinpath("grammar.lark").read_text()
        _PARSER = Lark(text, start=["program", "expectation"], parser="lalr", propagate_positions=True)
    return _PARSER


def _pos(node) -> tuple[Optional[int], Optional[int]]:
    meta = getattr(node, "meta", None)
    if isinstance(node, Token):
        return node.line, node.column
    if meta is not None and not meta.empty:
        return meta.line, meta.column
    return None, None


def _parse(text: str, start: str):
    try:
        return _parser().parse(text, start=start)
    except lark.exceptions.UnexpectedInput as exc:
        ctx = ""
        try:
            ctx = ": " + exc.get_context(text).splitlines()[0].strip()
        except Exception:
            pass
        kind = "unexpected end of input" if isinstance(exc, lark.exceptions.UnexpectedEOF) else "syntax error"
        raise PgclSyntaxError(kind + ctx, getattr(exc, "line", None), getattr(exc, "column", None)) from None


def _transform(builder, tree):
    """Run a tree builder; front-end errors raised inside it surface unwrapped."""
    try:
        return builder.transform(tree)
    except lark.exceptions.VisitError as exc:
        if isinstance(exc.orig_exc, PgclError):
            raise exc.orig_exc from None
        raise


def _number(tok: Token) -> Fraction:
    return Fraction(str(tok))  # decimal literals become exact rationals


# -- arithmetic, shared by programs and expectation bodies ----------------------------

class _Arith(Transformer):
    """Builds ``ProgramExpr`` trees; rational literals are flagged for the caller."""

    def __init__(self, ctx: str):
        super().__init__()
        self.ctx = ctx  # "program" or "expectation"

    def _int(self, tok: Token) -> int:
        q = _number(tok)
        if q.denominator != 1:
            raise PgclSyntaxError("program arithmetic has no rational literals", tok.line, tok.column)
        return int(q)

    def num(self, c):
        (tok,) = c
        if self.ctx == "program":
            return A.Const(self._int(tok))
        return _Lin(LinExpr.const(_number(tok)))

    def frac(self, c):
        num, den = c
        if self.ctx == "program":
            raise PgclSyntaxError("program arithmetic has no rational literals", num.line, num.column)
        if _number(den) == 0:
            raise PgclSyntaxError("division by zero", den.line, den.column)
        return _Lin(LinExpr.const(_number(num) / _number(den)))

    def var(self, c):
        (tok,) = c
        if self.ctx == "program":
            return A.Var(str(tok))
        return _Lin(LinExpr.var(str(tok)), {(str(tok), tok.line, tok.column)})

    def add(self, c):
        return A.Add(c[0], c[1]) if self.ctx == "program" else c[0] + c[1]

    def sub(self, c):
        return A.Sub(c[0], c[1]) if self.ctx == "program" else c[0] - c[1]

    def scale(self, c):
        tok, e = c
        if self.ctx == "program":
            return A.Scale(self._int(tok), e)
        return e.scale(_number(tok))

    def mul(self, c):
        """Products need one constant factor; either side may carry it."""
        a, b = c
        if self.ctx == "program":
            if isinstance(b, A.Const):
                a, b = b, a
            if not isinstance(a, A.Const):
                raise PgclSyntaxError("nonlinear product in program arithmetic")
            return A.Scale(a.value, b)
        if b.lin.is_constant():
            a, b = b, a
        if not a.lin.is_constant():
            raise PgclSyntaxError("nonlinear product in an expectation")
        return b.scale(a.lin.constant())

    def juxt(self, c):
        tok, name = c
        return self.scale([tok, self.var([name])])

    def negate(self, c):
        if self.ctx == "program":
            raise PgclSyntaxError("unary minus is not part of program arithmetic")
        return c[0].scale(-1)


class _Lin:
    """Affine expectation body plus the variable occurrences it came from."""

    def __init__(self, lin: LinExpr, occ=None):
        self.lin = lin
        self.occ = set(occ or ())

    def __add__(self, o):
        return _Lin(self.lin + o.lin, self.occ | o.occ)

    def __sub__(self, o):
        return _Lin(self.lin - o.lin, self.occ | o.occ)

    def scale(self, q):
        return _Lin(self.lin.scale(q), self.occ)


def _lin_of(e) -> LinExpr:
    return e.to_lin() if isinstance(e, A.ProgramExpr) else e.lin


# -- guards ---------------------------------------------------------------------

def _cmp_guard(left, op: str, right) -> A.Guard:
    """Expand comparison sugar into ``<``, ``!`` and ``&``."""
    lt = A.Lt
    if op == "<":
        return lt(left, right)
    if op == ">":
        return lt(right, left)
    if op == "<=":
        return A.GNot(lt(right, left))
    if op == ">=":
        return A.GNot(lt(left, right))
    eq = A.GAnd(A.GNot(lt(left, right)), A.GNot(lt(right, left)))
    if op == "=":
        return eq
    return A.GNot(eq)  # "!="


def _or(a: A.Guard, b: A.Guard) -> A.Guard:
    return A.GNot(A.GAnd(A.GNot(a), A.GNot(b)))


_TRUE_G = A.Lt(A.Const(0), A.Const(1))
_FALSE_G = A.Lt(A.Const(0), A.Const(0))


class _GuardBuilder(_Arith):
    """Program guards as ``Guard`` trees."""

    def cmp(self, c):
        left, op, right = c
        return _cmp_guard(left, str(op), right)

    def bneg(self, c):
        return A.GNot(c[0])

    def band(self, c):
        out = c[0]
        for g in c[1:]:
            out = A.GAnd(out, g)
        return out

    def bor(self, c):
        out = c[0]
        for g in c[1:]:
            out = _or(out, g)
        return out

    def btrue(self, c):
        return _TRUE_G

    def bfalse(self, c):
        return _FALSE_G


class _BoolBuilder(_Arith):
    """Expectation guards directly as canonical ``BoolExpr`` (rational constants allowed)."""

    def __init__(self):
        super().__init__("expectation")

    def cmp(self, c):
        left, op, right = c
        a, b = left.lin, right.lin
        op = str(op)
        if op == "<":
            r = less(a, b)
        elif op == ">":
            r = less(b, a)
        elif op == "<=":
            r = leq(a, b)
        elif op == ">=":
            r = leq(b, a)
        elif op == "=":
            r = conj([leq(a, b), leq(b, a)])
        else:
            r = neg(conj([leq(a, b), leq(b, a)]))
        return _Guarded(r, left.occ | right.occ)

    def bneg(self, c):
        return _Guarded(neg(c[0].expr), c[0].occ)

    def band(self, c):
        return _Guarded(conj(g.expr for g in c), set().union(*(g.occ for g in c)))

    def bor(self, c):
        return _Guarded(disj(g.expr for g in c), set().union(*(g.occ for g in c)))

    def btrue(self, c):
        return _Guarded(TRUE, set())

    def bfalse(self, c):
        return _Guarded(FALSE, set())


class _Guarded:
    def __init__(self, expr: BoolExpr, occ):
        self.expr = expr
        self.occ = occ


# -- programs -------------------------------------------------------------------

def _prob(node) -> Fraction:
    toks = node.children
    q = _number(toks[0])
    if len(toks) == 2:
        den = _number(toks[1])
        if den == 0:
            raise ProbabilityError("division by zero in probability", toks[1].line, toks[1].column)
        q = q / den
    if not (0 <= q <= 1):
        raise ProbabilityError(f"probability {q} outside [0,1]", toks[0].line, toks[0].column)
    return q


class _ProgramBuilder(_GuardBuilder):
    def __init__(self):
        super().__init__("program")

    def prob(self, c):
        return _prob(lark.Tree("prob", c))

    def skip(self, c):
        return A.Skip()

    def empty(self, c):
        return None

    def assign(self, c):
        name, e = c
        return _Located(A.Assign(str(name), e), name)

    def catitem(self, c):
        return (c[0], c[1])

    @v_args(meta=True)
    def categorical(self, meta, c):
        name, items = c[0], c[1:]
        total = sum((p for _, p in items), Fraction(0))
        if total != 1:
            raise ProbabilityError(f"categorical weights sum to {total}, not 1", meta.line, meta.column)
        return _Located(_categorical(str(name), items), name)

    def block(self, c):
        return A.seq(s.stmt if isinstance(s, _Located) else s for s in c if s is not None)

    def pchoice(self, c):
        left, p, right = c
        return A.PChoice(left, p, right)

    def ite(self, c):
        return A.Ite(c[0], c[1], c[2])

    def ite_then(self, c):
        return A.Ite(c[0], c[1], A.Skip())

    def bounds(self, c):
        lo, hi = (self._int(t) for t in c)
        if lo > hi:
            raise PgclSyntaxError(f"empty bounds [{lo},{hi}]", c[0].line, c[0].column)
        return (lo, hi)

    def decl(self, c):
        name = c[0]
        lo, hi = c[1] if len(c) > 1 else (None, None)
        return _Located(A.Decl(str(name), lo, hi), name)

    def program(self, c):
        decls = [d for d in c if isinstance(d, _Located) and isinstance(d.stmt, A.Decl)]
        guard, body = c[len(decls)], c[len(decls) + 1]
        return decls, guard, body


class _Located:
    def __init__(self, stmt, tok: Token):
        self.stmt = stmt
        self.line = tok.line
        self.column = tok.column


def _categorical(x: str, items) -> A.Stmt:
    """``x := v1:p1 + ... + vk:pk`` as nested binary choices with renormalised weights."""
    (v, p), rest = items[0], items[1:]
    if not rest:
        return A.Assign(x, v)
    remaining = 1 - p
    if remaining == 0:
        return A.Assign(x, v)
    tail = [(w, q / remaining) for w, q in rest]
    left_mass = sum((q for _, q in rest), Fraction(0))
    if left_mass == 0:
        return A.Assign(x, v)
    return A.PChoice(A.Assign(x, v), p, _categorical(x, tail))


def _check_vars(tree_vars, declared: set[str], what: str) -> None:
    for name, line, col in sorted(tree_vars, key=lambda t: (t[1] or 0, t[2] or 0)):
        if name not in declared:
            raise UndeclaredVariable(f"undeclared variable {name!r} in {what}", line, col)


def _var_tokens(tree) -> set:
    out = set()
    for tok in tree.scan_values(lambda t: isinstance(t, Token) and t.type == "NAME"):
        out.add((str(tok), tok.line, tok.column))
    return out


def parse_program(text: str, check_underflow: bool = True) -> A.LoopProgram:
    """Parse a program; raises :class:`PgclError` subclasses with line/column."""
    tree = _parse(text, "program")
    decls, guard, body = _transform(_ProgramBuilder(), tree)
    seen: set[str] = set()
    for d in decls:
        if d.stmt.name in seen:
            raise PgclSyntaxError(f"variable {d.stmt.name!r} declared twice", d.line, d.column)
        seen.add(d.stmt.name)
    declared_toks = {(d.stmt.name, d.line, d.column) for d in decls}
    _check_vars(_var_tokens(tree) - declared_toks, seen, "program")
    prog = A.LoopProgram(tuple(d.stmt for d in decls), guard, body)
    if check_underflow:
        from .analysis import check_underflow as _cu

        _cu(prog)
    return prog


# -- expectations ------------------------------------------------------------------

class _ExpectationBuilder(_BoolBuilder):
    def inf(self, c):
        return "INF"

    def bracket(self, c):
        return (c[0], c[1])

    def bracket_one(self, c):
        return (c[0], _Lin(LinExpr.const(1)))

    def plain(self, c):
        return (None, c[0])

    def expectation(self, c):
        return list(c)


def parse_expectation_terms(text: str, program: A.LoopProgram):
    """Raw guarded terms ``(BoolExpr | None, LinExpr | "INF")`` of an expectation."""
    from ..expectations.piecewise import INF

    tree = _parse(text, "expectation")
    terms = _transform(_ExpectationBuilder(), tree)
    _check_vars(_var_tokens(tree), set(program.variables), "expectation")
    out = []
    for g, body in terms:
        out.append((None if g is None else g.expr, INF if body == "INF" else body.lin))
    return out


def parse_expectation(text: str, program: A.LoopProgram):
    """Piecewise expectation, completed to a partition with an implicit ``else 0`` piece.

    Plain affine summands (outside brackets) are collected into one piece that
    holds everywhere, so they may not be mixed with bracketed pieces.
    """
    from ..expectations.boolexpr import to_cubes
    from ..expectations.normalize import get_checker, normalize
    from ..expectations.piecewise import INF, GuardedSum, Piece

    raw = parse_expectation_terms(text, program)
    plain = [b for g, b in raw if g is None]
    guarded = [(g, b) for g, b in raw if g is not None]
    if plain and guarded:
        raise ExpectationError("plain summands cannot be mixed with bracketed pieces")
    if plain:
        body = LinExpr()
        for b in plain:
            if b is INF:
                raise ExpectationError("INF must be guarded")
            body = body + b
        guarded = [(TRUE, body)]
    for g, b in guarded:
        if b is not INF and b.is_constant() and b.constant() < 0:
            raise ExpectationError(f"negative constant piece [{g}]*{b}")
    chk = get_checker()
    cubes = [to_cubes(g) for g, _ in guarded]
    for i in range(len(guarded)):
        for j in range(i + 1, len(guarded)):
            for ci in cubes[i]:
                for cj in cubes[j]:
                    if chk.simplify(ci | cj) is not None:
                        raise ExpectationError(
                            f"piece guards overlap: [{guarded[i][0]}] and [{guarded[j][0]}]"
                        )
    rest = to_cubes(conj(neg(g) for g, _ in guarded))
    pieces = [Piece(tuple(c), b) for c, (_, b) in zip(cubes, guarded)]
    pieces.append(Piece(tuple(rest), LinExpr()))
    return normalize(GuardedSum(tuple(p for p in pieces if p.guard), partition=True))


def parse_property(text: str, program: A.LoopProgram):
    """``post: <expr>`` and ``pre: <expr>`` lines; returns ``(f, g)``."""
    found: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, rest = stripped.partition(":")
        key = key.strip()
        if not sep or key not in ("post", "pre"):
            raise PgclSyntaxError("expected 'post: <expr>' or 'pre: <expr>'", lineno, 1)
        if key in found:
            raise PgclSyntaxError(f"duplicate {key!r} line", lineno, 1)
        found[key] = rest
    for key in ("post", "pre"):
        if key not in found:
            raise PgclSyntaxError(f"missing {key!r} line")
    f = parse_expectation(found["post"], program)
    if f.has_inf():
        raise ExpectationError("the postexpectation must be finite")
    g = parse_expectation(found["pre"], program)
    return f, g
