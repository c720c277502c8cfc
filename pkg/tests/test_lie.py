from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from g2forge.errors import JacobiFailed, NotDerivation, ParseError, SchemaError
from g2forge.exterior import Form, basis, e, wedge
from g2forge.lie import (LieAlgebra, ce_d, eigenvalue_type, is_unimodular, iwasawa_check, jacobi_check,
                         lower_central_series, require_jacobi, solvable_extension)

N1 = "(0,0,e15,e25,0,e12)"
ROW4 = "(-4/5*m*e17,-6/5*m*e27-2/5*m*e45,-7/5*m*e37+2/5*m*(e15-e46),-3/5*m*e47,-3/5*m*e57,-4/5*m*e67,0)"
THREE_STEP = "(2*b*e17+sqrt(6)*b*e26,b*e27,2*b*e37-sqrt(6)*b*e46,b*e47,2*b*e57-sqrt(6)*b*e24,b*e67,0)"


def int_form(rng, dim, k, lo=-3, hi=4):
    B = basis(dim, k)
    return Form(dim, k, {I: int(c) for I, c in zip(B, rng.integers(lo, hi, size=len(B))) if c})


def test_parse_simple():
    a = LieAlgebra.parse(N1)
    assert a.dim == 6
    assert a.d[2] == {(0, 4): 1}
    assert a.is_exact()


def test_bracket_convention():
    # de^3 = e^15 means [e_5, e_1] = e_3
    a = LieAlgebra.parse(N1)
    assert np.allclose(a.bracket(np.eye(6)[4], np.eye(6)[0]), np.eye(6)[2])
    assert a.bracket_exact(0, 4) == {2: -1}


def test_parse_parameters_exact():
    a = LieAlgebra.parse(ROW4, {"m": -1})
    assert a.d[1][(3, 4)] == Fraction(2, 5)
    assert a.d[0][(0, 6)] == Fraction(4, 5)
    b = a.bind(m=Fraction(-1, 2))
    assert b.d[0][(0, 6)] == Fraction(2, 5)


def test_parse_errors():
    with pytest.raises(SchemaError):
        LieAlgebra.parse("(0,0,e19)")
    with pytest.raises(ParseError):
        LieAlgebra.parse("(0,0,e12+1)")
    with pytest.raises(SchemaError):
        LieAlgebra.parse("(0,e12*m,0)")


def test_jacobi_passes_on_catalogue_shapes():
    assert jacobi_check(LieAlgebra.parse(N1)).passed
    assert jacobi_check(LieAlgebra.parse(ROW4, {"m": -1})).exact
    rep = jacobi_check(LieAlgebra.parse(THREE_STEP, {"b": 1}))
    assert rep.passed and rep.exact


def test_jacobi_witness():
    bad = LieAlgebra.parse("(0,0,e15,e25,e24,e12)")
    rep = jacobi_check(bad)
    assert not rep.passed and rep.exact
    assert rep.witness == 2
    assert rep.residual == -e(6, "124")
    with pytest.raises(JacobiFailed) as info:
        require_jacobi(bad)
    assert info.value.witness == 2


def test_jacobi_float_tolerance():
    a = LieAlgebra([{}, {}, {(0, 1): 0.1}])
    assert jacobi_check(a).passed and not jacobi_check(a).exact


def test_d_of_constants_and_d_squared():
    a = LieAlgebra.parse(N1)
    assert ce_d(a, Form.scalar(6, 3)).is_zero()
    assert ce_d(a, e(6, "3")) == e(6, "15")


@given(st.integers(0, 2 ** 16), st.integers(0, 4))
def test_d_squared_vanishes(seed, k):
    a = LieAlgebra.parse(ROW4, {"m": -1})
    rng = np.random.default_rng(seed)
    x = int_form(rng, 7, k)
    assert ce_d(a, ce_d(a, x)).is_zero()


@given(st.integers(0, 2 ** 16), st.integers(0, 3), st.integers(0, 3))
def test_leibniz(seed, k, l):
    a = LieAlgebra.parse(ROW4, {"m": -1})
    rng = np.random.default_rng(seed)
    x = int_form(rng, 7, k, -2, 3)
    y = int_form(rng, 7, l, -2, 3)
    lhs = ce_d(a, wedge(x, y))
    rhs = wedge(ce_d(a, x), y) + (-1) ** k * wedge(x, ce_d(a, y))
    assert lhs == rhs


def test_d_matrix_agrees_with_ce_d():
    a = LieAlgebra.parse(ROW4, {"m": -1})
    x = Form.from_labels(7, {"125": 1, "347": 2})
    assert np.allclose(a.d_matrix(3) @ x.to_array(), ce_d(a, x).to_array())


def test_central_series():
    assert lower_central_series(LieAlgebra.parse(N1)).dims == [6, 3, 0]
    assert lower_central_series(LieAlgebra.parse(N1)).step == 2
    filiform = LieAlgebra.parse("(0,0,e12,e13,e14,e15)")
    assert lower_central_series(filiform).step == 5
    assert not lower_central_series(LieAlgebra.parse(ROW4, {"m": -1})).nilpotent
    floaty = LieAlgebra([{}, {}, {(0, 1): 0.5}])
    assert lower_central_series(floaty).step == 2


def test_unimodular():
    assert is_unimodular(LieAlgebra.parse(N1))
    assert not is_unimodular(LieAlgebra.parse(ROW4, {"m": -1}))


def test_solvable_extension_reproduces_table_row():
    base = LieAlgebra.parse("(0,-2/5*m*e45,2/5*m*(e15-e46),0,0,0)", {"m": -1})
    D = np.diag([Fraction(4, 5), Fraction(6, 5), Fraction(7, 5), Fraction(3, 5), Fraction(3, 5),
                 Fraction(4, 5)]).tolist()
    D = [[Fraction(v) for v in row] for row in D]
    ext = solvable_extension(base, D, m=-1)
    assert ext.result.d == LieAlgebra.parse(ROW4, {"m": -1}).d
    assert jacobi_check(ext.result).passed
    assert iwasawa_check(ext).passed


def test_not_derivation():
    base = LieAlgebra.parse(N1)
    D = np.eye(6).tolist()
    with pytest.raises(NotDerivation) as info:
        solvable_extension(base, D)
    assert info.value.witness == (0, 1)


def test_eigenvalue_type():
    et = eigenvalue_type([[Fraction(4, 5), 0], [0, Fraction(2, 5)]])
    assert et.eigenvalues == [Fraction(2, 5), Fraction(4, 5)]
    assert et.scaled() == [1.0, 2.0]
    jordan = eigenvalue_type([[1, 1], [0, 1]])
    assert not jordan.diagonalizable
    assert not eigenvalue_type([[0.0, 1.0], [1.0, 1e-3]]).eigenvalues == []
