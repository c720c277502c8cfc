from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from g2forge.coeff import ScalarExpr
from g2forge.errors import SchemaError, SingularMetric
from g2forge.exterior import (Form, FrameMetric, basis, compound, e, hodge, inner, interior, norm, sort_sign,
                              wedge, wedge_all)

N = 7


@st.composite
def forms(draw, degree=None, dim=N):
    k = draw(st.integers(0, dim)) if degree is None else degree
    B = basis(dim, k)
    coeffs = draw(st.lists(st.integers(-3, 3), min_size=len(B), max_size=len(B)))
    return Form(dim, k, {I: c for I, c in zip(B, coeffs) if c})


@st.composite
def metrics(draw, dim=N):
    seed = draw(st.integers(0, 2 ** 16))
    A = np.random.default_rng(seed).normal(size=(dim, dim))
    return FrameMetric(A @ A.T + dim * np.eye(dim))


def test_sort_sign():
    assert sort_sign((2, 0, 1)) == (1, (0, 1, 2))
    assert sort_sign((1, 0)) == (-1, (0, 1))
    assert sort_sign((1, 1))[0] == 0


def test_labels_and_indexing():
    x = Form.from_labels(7, {"147": 1, "237": -1})
    assert x["147"] == 1 and x[(1, 2, 6)] == -1
    assert x["123"] == 0
    assert wedge(e(7, "1"), e(7, "2")) == e(7, "12")
    assert wedge(e(7, "2"), e(7, "1")) == -e(7, "12")


def test_bad_labels():
    with pytest.raises(Exception):
        Form.from_labels(6, {"17": 1})


def test_json_roundtrip_and_errors():
    x = Form.from_labels(6, {"125": Fraction(2, 5), "345": -1})
    assert Form.from_json(x.to_json()) == x
    with pytest.raises(SchemaError):
        Form.from_json({"dim": 6, "degree": 2, "terms": [{"idx": [2, 1], "c": 1}]})
    with pytest.raises(SchemaError):
        Form.from_json({"dim": 6, "degree": 2, "terms": [{"idx": [1, 9], "c": 1}]})


def test_symbolic_coefficients():
    f = ScalarExpr.exp(2)
    x = Form.from_labels(7, {"12": 1}) * f
    y = wedge(x, e(7, "3"))
    assert y["123"] == f
    assert y.at(0.0)["123"] == pytest.approx(1.0)


@given(forms(), forms(), forms())
def test_wedge_associative(x, y, z):
    if x.degree + y.degree + z.degree > N:
        return
    assert wedge(wedge(x, y), z) == wedge(x, wedge(y, z))


@given(forms(), forms())
def test_graded_commutative(x, y):
    if x.degree + y.degree > N:
        return
    sign = (-1) ** (x.degree * y.degree)
    assert wedge(x, y) == sign * wedge(y, x)


@given(forms(degree=1), forms(degree=3))
def test_one_forms_square_to_zero(a, x):
    assert wedge(a, a).is_zero()
    assert wedge_all(a, x, a).is_zero()


@given(st.integers(0, N - 1), forms(), forms())
def test_interior_is_antiderivation(i, x, y):
    if x.degree + y.degree > N or x.degree == 0 or y.degree == 0:
        return
    lhs = interior(i, wedge(x, y))
    rhs = wedge(interior(i, x), y) + (-1) ** x.degree * wedge(x, interior(i, y))
    assert lhs == rhs


@given(forms(), metrics())
def test_hodge_involution(x, g):
    k = x.degree
    back = hodge(hodge(x, g), g)
    assert np.allclose(back.to_array(), (-1) ** (k * (N - k)) * x.to_array(), atol=1e-9)


@given(forms(degree=3), forms(degree=3), metrics())
def test_hodge_defines_inner_product(x, y, g):
    top = wedge(x, hodge(y, g))
    vol = g.volume_form()
    assert top.to_array()[0] == pytest.approx(float(inner(x, y, g)) * vol.to_array()[0], abs=1e-8)


@given(forms(degree=2))
def test_euclidean_norm(x):
    assert norm(x) == pytest.approx(np.linalg.norm(x.to_array()))


def test_orientation_flips_hodge():
    g = FrameMetric.euclidean(7)
    x = e(7, "147")
    assert hodge(x, g.with_orientation(-1)) == -hodge(x, g)


def test_symbolic_diagonal_metric_hodge():
    f = ScalarExpr.exp(-1)
    g = FrameMetric.diagonal([f * f] * 3)
    star1 = hodge(e(3, "1"), g)
    assert star1["23"].eval(0.5) == pytest.approx(np.exp(-0.5))


def test_singular_metric():
    with pytest.raises(SingularMetric):
        FrameMetric(np.diag([1.0, 0.0, 1.0]))


@given(st.integers(0, 2 ** 16), st.integers(1, 3))
def test_compound_is_multiplicative(seed, k):
    rng = np.random.default_rng(seed)
    A, B = rng.normal(size=(5, 5)), rng.normal(size=(5, 5))
    assert np.allclose(compound(A @ B, k), compound(A, k) @ compound(B, k))
