"""Motzkin transposition: universally quantified linear implications as existential constraints.

``forall x: A x <= a  and  B x < b  ==>  alpha . x <= beta`` holds over the reals
when there are multipliers ``lambda, eta >= 0`` and ``eta0 >= 0`` such that either

* ``sum lambda_i (a_i - A_i x) + sum eta_j (b_j - B_j x) + eta0 == 0`` identically
  in ``x`` with ``eta0 + sum eta_j > 0`` (the premise is infeasible), or
* ``sum lambda_i (a_i - A_i x) + sum eta_j (b_j - B_j x) + (alpha . x - beta) + eta0 == 0``
  identically (the conclusion is a nonnegative combination of the premise).

The coupling factor in front of the conclusion is split into the cases 0 and 1,
which keeps everything linear in template variables and multipliers.  The encoding
is sound for natural-valued ``x`` as well, but not complete there: a statement that
holds on the naturals yet fails somewhere on the reals is lost.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from ..expectations.linexpr import LinExpr
from .terms import Constraint, conj_c, disj_c, eq_c, le_c, lt_c

_fresh = itertools.count()


@dataclass(frozen=True)
class UniversalImplication:
    """Premise rows ``lin <= 0`` / ``lin < 0`` over program variables, conclusion ``target <= 0``.

    Premise rows are template-free; the conclusion may have template-variable
    coefficients.
    """

    nonstrict: tuple[LinExpr, ...]
    strict: tuple[LinExpr, ...]
    target: LinExpr

    @staticmethod
    def from_matrices(variables: Sequence[str], A, a, B, b, alpha: Mapping[str, LinExpr], beta: LinExpr) -> "UniversalImplication":
        def row(coeffs, rhs):
            lin = LinExpr({(x, None): Fraction(q) for x, q in zip(variables, coeffs)})
            return lin - Fraction(rhs)

        target = -beta
        for x in variables:
            target = target + _times_var(alpha.get(x, LinExpr()), x)
        return UniversalImplication(
            tuple(row(r, c) for r, c in zip(A, a)),
            tuple(row(r, c) for r, c in zip(B, b)),
            target,
        )

    def variables(self) -> set[str]:
        out = self.target.pvars()
        for l in self.nonstrict + self.strict:
            out |= l.pvars()
        return out

    def holds_at(self, point: Mapping[str, Fraction], val: Mapping[str, Fraction]) -> bool:
        """Direct evaluation of the implication at one point."""
        if any(l.evaluate(point) > 0 for l in self.nonstrict):
            return True
        if any(l.evaluate(point) >= 0 for l in self.strict):
            return True
        return self.target.evaluate(point, val) <= 0


def _times_var(coeff: LinExpr, x: str) -> LinExpr:
    """``coeff * x`` for a coefficient that is affine in template variables only."""
    return LinExpr({(x, tv): q for (pv, tv), q in coeff.terms.items()})


def _times_mult(lin: LinExpr, mult: str) -> dict:
    """Coefficients of ``mult * lin`` grouped by program variable (``None`` for the constant)."""
    out: dict = {}
    for (pv, tv), q in lin.terms.items():
        assert tv is None, "premise rows must be template-free"
        out[pv] = out.get(pv, LinExpr()) + LinExpr.tvar(mult, q)
    return out


def motzkin_encode(u: UniversalImplication, prefix: str | None = None) -> Constraint:
    """Linear constraint over template variables and fresh multipliers implying ``u``."""
    prefix = prefix or f"mz{next(_fresh)}"
    lam = [f"{prefix}_l{i}" for i in range(len(u.nonstrict))]
    eta = [f"{prefix}_e{j}" for j in range(len(u.strict))]
    eta0 = f"{prefix}_e0c"
    acc: dict = {}

    def add(part: dict):
        for k, v in part.items():
            acc[k] = acc.get(k, LinExpr()) + v

    for m, row in zip(lam, u.nonstrict):
        add(_times_mult(-row, m))
    for m, row in zip(eta, u.strict):
        add(_times_mult(-row, m))
    add({None: LinExpr.tvar(eta0)})

    keys = set(acc) | {pv for pv, _ in u.target.terms}
    nonneg = [le_c(LinExpr(), LinExpr.tvar(m)) for m in lam + eta + [eta0]]
    infeasible = [eq_c(acc.get(k, LinExpr())) for k in keys]
    infeasible.append(lt_c(LinExpr(), sum((LinExpr.tvar(m) for m in eta + [eta0]), LinExpr())))
    target_coeff = {k: u.target.coeff(k) for k in keys}
    entailed = [eq_c(acc.get(k, LinExpr()) + target_coeff[k]) for k in keys]
    return conj_c(nonneg + [disj_c([conj_c(infeasible), conj_c(entailed)])])


def multiplier_prefix(name: str) -> bool:
    return name.startswith("mz")
