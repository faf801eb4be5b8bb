"""Pretty-printing of programs in the same surface syntax the parser reads."""
from __future__ import annotations

from fractions import Fraction

from . import ast as A


def format_prob(p: Fraction) -> str:
    return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"


def format_expr(e: A.ProgramExpr, prec: int = 0) -> str:
    if isinstance(e, A.Const):
        return str(e.value)
    if isinstance(e, A.Var):
        return e.name
    if isinstance(e, A.Scale):
        return f"{e.factor}*{format_expr(e.arg, 2)}"
    if isinstance(e, (A.Add, A.Sub)):
        op = "+" if isinstance(e, A.Add) else "-"
        s = f"{format_expr(e.left, 1)} {op} {format_expr(e.right, 2)}"
        return f"({s})" if prec >= 2 else s
    raise TypeError(e)


def format_guard(g: A.Guard, prec: int = 0) -> str:
    if isinstance(g, A.Lt):
        return f"{format_expr(g.left)} < {format_expr(g.right)}"
    if isinstance(g, A.GNot):
        return f"!{format_guard(g.arg, 2)}" if isinstance(g.arg, A.GNot) else f"!({format_guard(g.arg)})"
    if isinstance(g, A.GAnd):
        s = f"{format_guard(g.left, 1)} & {format_guard(g.right, 2)}"
        return f"({s})" if prec >= 2 else s
    raise TypeError(g)


def format_stmt(s: A.Stmt, indent: int = 1) -> list[str]:
    pad = "  " * indent
    if isinstance(s, A.Seq):
        return format_stmt(s.first, indent) + format_stmt(s.second, indent)
    if isinstance(s, A.Skip):
        return [pad + "skip;"]
    if isinstance(s, A.Assign):
        return [f"{pad}{s.var} := {format_expr(s.expr)};"]
    if isinstance(s, A.PChoice):
        return (
            [pad + "{"]
            + format_stmt(s.left, indent + 1)
            + [f"{pad}}} [{format_prob(s.prob)}] {{"]
            + format_stmt(s.right, indent + 1)
            + [pad + "}"]
        )
    if isinstance(s, A.Ite):
        return (
            [f"{pad}if ({format_guard(s.cond)}) {{"]
            + format_stmt(s.then, indent + 1)
            + [pad + "} else {"]
            + format_stmt(s.other, indent + 1)
            + [pad + "}"]
        )
    raise TypeError(s)


def format_program(p: A.LoopProgram) -> str:
    lines = []
    for d in p.decls:
        b = f" [{d.lo},{d.hi}]" if d.bounded else ""
        lines.append(f"nat {d.name}{b};")
    lines.append(f"while ({format_guard(p.guard)}) {{")
    lines += format_stmt(p.body)
    lines.append("}")
    return "\n".join(lines) + "\n"
