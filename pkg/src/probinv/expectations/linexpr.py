"""Affine expressions whose coefficients are themselves affine in template variables.

A monomial is keyed by ``(pvar, tvar)`` where either component may be ``None``:

* ``(x, None)``   rational coefficient of program variable ``x``
* ``(x, a)``      coefficient of the product ``a * x``
* ``(None, a)``   template variable ``a`` as part of the constant term
* ``(None, None)`` the rational constant

So the coefficient of ``x`` (a ``TCoeff``) is the slice of all keys with ``x`` in
front, and a plain ``TemplatedLinExpr`` is just a ``LinExpr`` without any product of
two program variables.  Substitution, instantiation and evaluation at a state are
all closed over this representation.
"""
from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Mapping, Optional, Tuple, Union

Key = Tuple[Optional[str], Optional[str]]
Number = Union[int, Fraction]

_CONST: Key = (None, None)


def _frac(q: Number) -> Fraction:
    if isinstance(q, Fraction):
        return q
    if isinstance(q, int):
        return Fraction(q)
    raise TypeError(f"exact rational expected, got {type(q).__name__}")


def _key_order(k: Key):
    pv, tv = k
    return (pv is None, pv or "", tv is not None, tv or "")


class LinExpr:
    """Immutable sparse affine form over program and template variables."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Key, Number] | Iterable[Tuple[Key, Number]] = ()):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[Key, Fraction] = {}
        for k, q in items:
            q = _frac(q)
            if q:
                acc[k] = acc.get(k, Fraction(0)) + q
        self._terms = {k: v for k, v in sorted(acc.items(), key=lambda kv: _key_order(kv[0])) if v}
        self._hash = None

    @classmethod
    def _canonical(cls, terms: dict) -> "LinExpr":
        """Wrap terms that are already ordered, nonzero Fractions."""
        obj = cls.__new__(cls)
        obj._terms = terms
        obj._hash = None
        return obj

    # -- constructors -------------------------------------------------
    @staticmethod
    def const(q: Number) -> "LinExpr":
        return LinExpr({_CONST: q})

    @staticmethod
    def var(x: str, q: Number = 1) -> "LinExpr":
        return LinExpr({(x, None): q})

    @staticmethod
    def tvar(a: str, q: Number = 1) -> "LinExpr":
        return LinExpr({(None, a): q})

    @staticmethod
    def product(x: str, a: str, q: Number = 1) -> "LinExpr":
        return LinExpr({(x, a): q})

    @staticmethod
    def affine_template(pvars: Iterable[str], prefix: str) -> "LinExpr":
        """``prefix_x * x + ... + prefix_0`` with one fresh template variable per slot."""
        terms = {(x, f"{prefix}_{x}"): 1 for x in pvars}
        terms[(None, f"{prefix}_0")] = 1
        return LinExpr(terms)

    # -- structure ----------------------------------------------------
    @property
    def terms(self) -> Mapping[Key, Fraction]:
        return self._terms

    def __iter__(self):
        return iter(self._terms.items())

    def __eq__(self, other) -> bool:
        return isinstance(other, LinExpr) and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(tuple(self._terms.items()))
        return self._hash

    def __bool__(self) -> bool:
        return bool(self._terms)

    def pvars(self) -> set[str]:
        return {pv for pv, _ in self._terms if pv is not None}

    def tvars(self) -> set[str]:
        return {tv for _, tv in self._terms if tv is not None}

    def has_pvars(self) -> bool:
        return any(pv is not None for pv, _ in self._terms)

    def has_tvars(self) -> bool:
        return any(tv is not None for _, tv in self._terms)

    def is_constant(self) -> bool:
        return all(k == _CONST for k in self._terms)

    def constant(self) -> Fraction:
        return self._terms.get(_CONST, Fraction(0))

    def value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError(f"not a constant: {self}")
        return self.constant()

    def coeff(self, x: Optional[str]) -> "LinExpr":
        """The TCoeff multiplying program variable ``x`` (``None`` gives the constant part)."""
        return LinExpr({(None, tv): q for (pv, tv), q in self._terms.items() if pv == x})

    def pcoeff(self, x: str) -> Fraction:
        """Rational coefficient of ``x`` in a template-free expression."""
        return self._terms.get((x, None), Fraction(0))

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other: "LinExpr | Number") -> "LinExpr":
        if not isinstance(other, LinExpr):
            other = LinExpr.const(other)
        return LinExpr(list(self._terms.items()) + list(other._terms.items()))

    __radd__ = __add__

    def __neg__(self) -> "LinExpr":
        return LinExpr._canonical({k: -q for k, q in self._terms.items()})

    def __sub__(self, other: "LinExpr | Number") -> "LinExpr":
        if not isinstance(other, LinExpr):
            other = LinExpr.const(other)
        return self + (-other)

    def __rsub__(self, other: Number) -> "LinExpr":
        return LinExpr.const(other) - self

    def scale(self, q: Number) -> "LinExpr":
        q = _frac(q)
        if not q:
            return LinExpr()
        return LinExpr._canonical({k: v * q for k, v in self._terms.items()})

    def __mul__(self, q: Number) -> "LinExpr":
        return self.scale(q)

    __rmul__ = __mul__

    # -- substitution / evaluation -----------------------------------
    def subst(self, mapping: Mapping[str, "LinExpr"]) -> "LinExpr":
        """Simultaneously replace program variables by template-free affine expressions."""
        if not any(pv in mapping for pv, _ in self._terms):
            return self
        out: list[Tuple[Key, Fraction]] = []
        for (pv, tv), q in self._terms.items():
            if pv is None or pv not in mapping:
                out.append(((pv, tv), q))
                continue
            e = mapping[pv]
            for (epv, etv), eq in e._terms.items():
                if etv is not None:
                    raise ValueError("substituted expression must be template-free")
                out.append(((epv, tv), q * eq))
        return LinExpr(out)

    def at_state(self, state: Mapping[str, int]) -> "LinExpr":
        """Replace every program variable by its value; result ranges over template variables."""
        out = []
        for (pv, tv), q in self._terms.items():
            if pv is None:
                out.append(((None, tv), q))
            else:
                out.append(((None, tv), q * state[pv]))
        return LinExpr(out)

    def instantiate(self, val: Mapping[str, Fraction]) -> "LinExpr":
        out = []
        for (pv, tv), q in self._terms.items():
            if tv is None:
                out.append(((pv, None), q))
            else:
                out.append(((pv, None), q * _frac(val[tv])))
        return LinExpr(out)

    def evaluate(self, state: Mapping[str, int], val: Mapping[str, Fraction] | None = None) -> Fraction:
        total = Fraction(0)
        for (pv, tv), q in self._terms.items():
            t = q
            if pv is not None:
                t *= state[pv]
            if tv is not None:
                if val is None:
                    raise KeyError(tv)
                t *= _frac(val[tv])
            total += t
        return total

    def integer_scaled(self) -> Tuple["LinExpr", int]:
        """Positive multiple with integer coefficients, and the multiplier used."""
        den = 1
        for q in self._terms.values():
            den = lcm(den, q.denominator)
        return self.scale(den), den

    def denominators_lcm(self) -> int:
        den = 1
        for q in self._terms.values():
            den = lcm(den, q.denominator)
        return den

    def content_gcd(self, include_constant: bool = True) -> int:
        g = 0
        for k, q in self._terms.items():
            if include_constant or k != _CONST:
                g = gcd(g, q.numerator)
        return g

    # -- printing -----------------------------------------------------
    def __repr__(self) -> str:
        return f"LinExpr({self})"

    def __str__(self) -> str:
        return format_linexpr(self)


def _fmt_q(q: Fraction) -> str:
    return str(q)


def _fmt_tcoeff(tc: list[Tuple[Optional[str], Fraction]]) -> Tuple[str, bool]:
    """Render a TCoeff; second component tells whether it is a single signed rational."""
    if len(tc) == 1 and tc[0][0] is None:
        return _fmt_q(tc[0][1]), True
    parts = []
    for tv, q in tc:
        if tv is None:
            parts.append(_fmt_q(q))
        elif q == 1:
            parts.append(tv)
        elif q == -1:
            parts.append(f"-{tv}")
        else:
            parts.append(f"{_fmt_q(q)}*{tv}")
    return " + ".join(parts), False


def format_linexpr(e: LinExpr) -> str:
    if not e.terms:
        return "0"
    groups: dict[Optional[str], list[Tuple[Optional[str], Fraction]]] = {}
    for (pv, tv), q in e.terms.items():
        groups.setdefault(pv, []).append((tv, q))
    chunks: list[Tuple[bool, str]] = []  # (negative, text)
    for pv in [k for k in groups if k is not None] + ([None] if None in groups else []):
        text, plain = _fmt_tcoeff(groups[pv])
        if plain:
            q = groups[pv][0][1]
            neg = q < 0
            mag = _fmt_q(abs(q))
            if pv is None:
                chunks.append((neg, mag))
            else:
                chunks.append((neg, pv if abs(q) == 1 else f"{mag}*{pv}"))
        else:
            single = len(groups[pv]) == 1
            if pv is None:
                chunks.append((False, text if single else f"({text})"))
            elif single and groups[pv][0][1] > 0:
                chunks.append((False, f"{text}*{pv}"))
            else:
                chunks.append((False, f"({text})*{pv}"))
    out = ""
    for i, (neg, text) in enumerate(chunks):
        if i == 0:
            out = f"-{text}" if neg else text
        else:
            out += f" - {text}" if neg else f" + {text}"
    return out
