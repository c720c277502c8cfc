"""Symbolic scalars of the form sum_k c_k (1 + s_k t)^{r_k} exp(a_k t).

This ring is closed under addition, multiplication and d/dt, which is all
that is needed to carry the time dependence of conformal rescalings and of
the closed-form flow solutions.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Number, Rational
from typing import Iterable, Mapping

from .errors import DomainError, IncompatibleBase

# Key of a term: (s, r, a).  r == 0 forces s == 0 and vice versa.
Key = tuple


def _as_rational(r) -> Fraction:
    if isinstance(r, Fraction):
        return r
    if isinstance(r, str):
        return Fraction(r.strip())
    if isinstance(r, Rational):
        return Fraction(r)
    if isinstance(r, float) and r.is_integer():
        return Fraction(int(r))
    raise TypeError(f"exponent must be rational, got {r!r}")


def _canon_key(s, r, a) -> Key:
    r = _as_rational(r)
    if r == 0 or s == 0:
        return (0, Fraction(0), a)
    return (s, r, a)


def _div(x, y):
    if isinstance(x, (int, Fraction)) and isinstance(y, (int, Fraction)):
        return Fraction(x) / y
    return x / y


def _num(x):
    # integral floats/ints stay exact so that sums cancel bitwise
    if isinstance(x, bool):
        return int(x)
    return x


class ScalarExpr:
    """Immutable finite sum of terms c (1+st)^r e^{at}."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Key, Number] | Iterable = (), eps: float = 0.0):
        acc: dict[Key, Number] = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for item in items:
            if len(item) == 2:
                (s, r, a), c = item
            else:
                c, s, r, a = item
            key = _canon_key(s, r, a)
            acc[key] = acc.get(key, 0) + _num(c)
        self._terms = {k: c for k, c in acc.items() if abs(c) > eps}
        self._hash = None

    # -- constructors -------------------------------------------------
    @classmethod
    def const(cls, c) -> ScalarExpr:
        return cls({(0, 0, 0): c})

    @classmethod
    def exp(cls, a, c=1) -> ScalarExpr:
        return cls({(0, 0, a): c})

    @classmethod
    def power(cls, s, r, c=1) -> ScalarExpr:
        return cls({(s, r, 0): c})

    @classmethod
    def term(cls, c, s=0, r=0, a=0) -> ScalarExpr:
        return cls({(s, r, a): c})

    @classmethod
    def coerce(cls, x) -> ScalarExpr:
        return x if isinstance(x, ScalarExpr) else cls.const(x)

    # -- inspection ---------------------------------------------------
    @property
    def terms(self) -> dict[Key, Number]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(k[1] == 0 and k[2] == 0 for k in self._terms)

    def constant_value(self):
        if not self.is_constant():
            raise ValueError(f"{self!r} depends on t")
        return self._terms.get((0, Fraction(0), 0), 0)

    def is_monomial(self) -> bool:
        return len(self._terms) == 1

    def chop(self, eps: float) -> ScalarExpr:
        return ScalarExpr(self._terms, eps=eps)

    # -- ring operations ----------------------------------------------
    def __add__(self, other):
        if not isinstance(other, (ScalarExpr, Number)):
            return NotImplemented
        other = ScalarExpr.coerce(other)
        acc = dict(self._terms)
        for k, c in other._terms.items():
            acc[k] = acc.get(k, 0) + c
        return ScalarExpr(acc)

    __radd__ = __add__

    def __neg__(self):
        return ScalarExpr({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        if not isinstance(other, (ScalarExpr, Number)):
            return NotImplemented
        return self + (-ScalarExpr.coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            if other == 0:
                return ScalarExpr()
            return ScalarExpr({k: c * other for k, c in self._terms.items()})
        if not isinstance(other, ScalarExpr):
            return NotImplemented
        acc: dict[Key, Number] = {}
        for (s1, r1, a1), c1 in self._terms.items():
            for (s2, r2, a2), c2 in other._terms.items():
                if r1 != 0 and r2 != 0 and s1 != s2:
                    raise IncompatibleBase(
                        f"cannot multiply (1+{s1}t)^{r1} by (1+{s2}t)^{r2}")
                s = s1 if r1 != 0 else s2
                key = _canon_key(s, r1 + r2, a1 + a2)
                acc[key] = acc.get(key, 0) + c1 * c2
        return ScalarExpr(acc)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Number):
            return ScalarExpr({k: _div(c, other) for k, c in self._terms.items()})
        if isinstance(other, ScalarExpr):
            return self * other.reciprocal()
        return NotImplemented

    def __rtruediv__(self, other):
        return ScalarExpr.coerce(other) * self.reciprocal()

    def __pow__(self, n):
        if isinstance(n, int) and n >= 0:
            out = ScalarExpr.const(1)
            for _ in range(n):
                out = out * self
            return out
        if not self.is_monomial():
            return NotImplemented
        ((s, r, a), c), = self._terms.items()
        n = _as_rational(n)
        if n.denominator == 1:
            coeff = Fraction(c) ** n if isinstance(c, (int, Fraction)) else c ** int(n)
        else:
            if c <= 0:
                raise DomainError("fractional power of a non-positive coefficient")
            coeff = float(c) ** float(n)
        return ScalarExpr({(s, r * n, a * n): coeff})

    def reciprocal(self) -> ScalarExpr:
        """1/x, defined only for a single term."""
        if not self.is_monomial():
            raise ValueError("only single-term expressions have a reciprocal in this ring")
        ((s, r, a), c), = self._terms.items()
        return ScalarExpr({(s, -r, -a): _div(1, c)})

    def sqrt(self) -> ScalarExpr:
        if not self.is_monomial():
            raise ValueError("only single-term expressions have a square root in this ring")
        ((s, r, a), c), = self._terms.items()
        if c <= 0:
            raise DomainError("square root of a non-positive coefficient")
        return ScalarExpr({(s, r / 2, _div(a, 2)): math.sqrt(c)})

    def ddt(self) -> ScalarExpr:
        acc: dict[Key, Number] = {}
        for (s, r, a), c in self._terms.items():
            if r != 0:
                k = _canon_key(s, r - 1, a)
                acc[k] = acc.get(k, 0) + c * r * s
            if a != 0:
                k = (s, r, a)
                acc[k] = acc.get(k, 0) + c * a
        return ScalarExpr(acc)

    def eval(self, t: float) -> float:
        total = 0.0
        for (s, r, a), c in self._terms.items():
            val = float(c)
            if r != 0:
                base = 1.0 + float(s) * t
                if r.denominator != 1 and base <= 0:
                    raise DomainError(f"(1+{s}t) = {base} <= 0 at t={t} with power {r}")
                if base == 0 and r < 0:
                    raise DomainError(f"(1+{s}t) vanishes at t={t}")
                val *= base ** (r.numerator if r.denominator == 1 else float(r))
            if a != 0:
                val *= math.exp(float(a) * t)
            total += val
        return total

    __call__ = eval

    # -- comparison / display -----------------------------------------
    def __eq__(self, other):
        if isinstance(other, Number):
            other = ScalarExpr.const(other)
        if not isinstance(other, ScalarExpr):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __bool__(self):
        return bool(self._terms)

    def __repr__(self):
        if not self._terms:
            return "ScalarExpr(0)"
        parts = []
        for (s, r, a), c in sorted(self._terms.items(), key=lambda kv: (float(kv[0][0]), kv[0][1], float(kv[0][2]))):
            p = f"{c}"
            if r != 0:
                p += f"*(1{'+' if s >= 0 else '-'}{abs(s)}t)^({r})"
            if a != 0:
                p += f"*exp({a}t)"
            parts.append(p)
        return "ScalarExpr(" + " + ".join(parts) + ")"

    # -- serialization ------------------------------------------------
    def to_json(self) -> dict:
        def enc(x):
            return str(x) if isinstance(x, Fraction) and x.denominator != 1 else (
                int(x) if isinstance(x, (int, Fraction)) else x)
        terms = [{"c": enc(c), "s": enc(s), "r": str(r), "a": enc(a)}
                 for (s, r, a), c in self._terms.items()]
        terms.sort(key=lambda d: (str(d["s"]), d["r"], str(d["a"])))
        return {"terms": terms}

    @classmethod
    def from_json(cls, data: Mapping) -> ScalarExpr:
        def dec(x):
            return Fraction(x) if isinstance(x, str) else x
        try:
            return cls((dec(t["c"]), dec(t.get("s", 0)), _as_rational(t.get("r", "0")),
                        dec(t.get("a", 0))) for t in data["terms"])
        except (KeyError, TypeError, ValueError) as exc:
            from .errors import ParseError
            raise ParseError(f"malformed ScalarExpr JSON: {exc}") from exc


def as_expr(x) -> ScalarExpr:
    return ScalarExpr.coerce(x)
