import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from g2forge.coeff import ScalarExpr
from g2forge.errors import DomainError, IncompatibleBase, ParseError

small = st.fractions(min_value=-2, max_value=2, max_denominator=5)
expo = st.sampled_from([Fraction(k, 5) for k in range(-6, 7)])


@st.composite
def exprs(draw, base=None):
    n = draw(st.integers(1, 3))
    s = base if base is not None else draw(st.sampled_from([Fraction(1), Fraction(-1, 2)]))
    return sum((ScalarExpr.term(draw(small), s, draw(expo), draw(small)) for _ in range(n)), ScalarExpr())


def test_constant_arithmetic():
    x = ScalarExpr.const(2) + 3
    assert x.is_constant() and x.constant_value() == 5
    assert (x * 0).is_zero()
    assert ScalarExpr.const(Fraction(1, 3)) * 3 == ScalarExpr.const(1)


def test_exponential_rules():
    a = ScalarExpr.exp(2)
    b = ScalarExpr.exp(-2)
    assert a * b == ScalarExpr.const(1)
    assert a.ddt() == 2 * a
    assert a.reciprocal() == b


def test_power_rules():
    p = ScalarExpr.power(1, Fraction(2, 5))
    assert p.eval(1.0) == pytest.approx(2 ** 0.4)
    assert (p * p * p * p * p) == ScalarExpr.power(1, 2)
    assert p.sqrt() == ScalarExpr.power(1, Fraction(1, 5))
    assert p.ddt().eval(0.0) == pytest.approx(0.4)


def test_cancellation_is_exact():
    x = ScalarExpr.term(3, 1, Fraction(1, 5), 2)
    assert (x - x).is_zero()


def test_domain_error():
    with pytest.raises(DomainError):
        ScalarExpr.power(1, Fraction(1, 2)).eval(-2.0)


def test_sqrt_needs_monomial():
    with pytest.raises(Exception):
        (ScalarExpr.exp(1) + ScalarExpr.exp(2)).sqrt()


def test_json_roundtrip():
    x = ScalarExpr.term(Fraction(2, 3), -1, Fraction(6, 5), 0) + ScalarExpr.exp(Fraction(1, 2), 4)
    assert ScalarExpr.from_json(x.to_json()) == x


def test_json_malformed():
    with pytest.raises(ParseError):
        ScalarExpr.from_json({"terms": [{"s": 1}]})


@given(exprs(), st.floats(0.0, 0.9))
def test_derivative_matches_finite_difference(x, t):
    h = 1e-5
    fd = (x.eval(t + h) - x.eval(t - h)) / (2 * h)
    assert x.ddt().eval(t) == pytest.approx(fd, rel=1e-6, abs=1e-6)


def test_mixed_bases_are_rejected():
    with pytest.raises(IncompatibleBase):
        ScalarExpr.power(1, Fraction(1, 5)) * ScalarExpr.power(2, Fraction(1, 5))


@given(exprs(1), exprs(1), st.floats(0.0, 0.9))
def test_product_rule_and_evaluation(x, y, t):
    assert (x * y).eval(t) == pytest.approx(x.eval(t) * y.eval(t), rel=1e-9, abs=1e-12)
    lhs = (x * y).ddt().eval(t)
    rhs = x.ddt().eval(t) * y.eval(t) + x.eval(t) * y.ddt().eval(t)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)
