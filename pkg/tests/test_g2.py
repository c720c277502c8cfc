from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from g2forge import catalog
from g2forge.errors import NonPositiveType, Tau2NonZero
from g2forge.exterior import Form, hodge, wedge
from g2forge.g2 import (PHI0, G2Structure, build_phi, conformal_parallel_check, fg_class, metric_from_phi,
                        skew_torsion, su3_from_g2, torsion)
from g2forge.lie import LieAlgebra
from g2forge.su3 import OMEGA0, PSI_MINUS0, PSI_PLUS0, SU3Structure, act_on_form

TABLE = [f"table_row{k}" for k in range(1, 8)]
E7 = Form(7, 1, {(6,): 1})


def test_standard_metric_and_dual():
    gs = G2Structure(PHI0)
    assert np.array_equal(gs.g, np.eye(7))
    assert gs.metric.orientation == -1
    omega = Form.from_labels(7, {"14": 1, "23": -1, "56": 1})
    psi_minus = Form.from_labels(7, {"126": 1, "135": -1, "245": -1, "346": -1})
    assert gs.star_phi == wedge(psi_minus, E7) + Fraction(1, 2) * wedge(omega, omega)
    assert wedge(PHI0, gs.star_phi)[tuple(range(7))] == -7


def test_degenerate_phi():
    with pytest.raises(NonPositiveType):
        metric_from_phi(Form.from_labels(7, {"123": 1, "456": 1}))


def test_build_and_split():
    s = SU3Structure(OMEGA0, PSI_PLUS0)
    gs = build_phi(s)
    assert gs.phi == PHI0
    back = su3_from_g2(gs)
    assert back.omega == OMEGA0 and back.psi_plus == PSI_PLUS0
    assert back.psi_minus.allclose(PSI_MINUS0)


def test_torsion_free_on_abelian():
    tc = torsion(G2Structure(PHI0))
    assert fg_class(tc).label == "parallel"


@pytest.mark.parametrize("ref", TABLE)
def test_table_rows_are_class_t1(ref):
    entry = catalog.load(ref)
    tc = torsion(entry.g2())
    assert fg_class(tc).label == "T1"
    assert tc.ranks == (43, 28)
    # tau1 is proportional to e7 and closed
    assert tc.tau1.allclose(entry.m * E7, atol=1e-12)
    assert entry.g2().d(tc.tau1).is_zero()


def test_three_step_classes_and_skew_torsion():
    gs = catalog.load("eq_3step").g2()
    tc = torsion(gs)
    assert fg_class(tc).label == "T1+T3"
    T = skew_torsion(gs, tc)
    assert T.degree == 3 and not T.is_zero()


def test_tau2_blocks_skew_torsion():
    # a generic frame change of a T1 structure picks up tau2
    entry = catalog.load("table_row4")
    A = np.eye(7) + 0.3 * np.random.default_rng(3).normal(size=(7, 7))
    gs = G2Structure(act_on_form(A, PHI0), entry.algebra)
    tc = torsion(gs)
    assert fg_class(tc).label == "T0+T1+T2+T3"
    with pytest.raises(Tau2NonZero):
        skew_torsion(gs, tc)


@given(st.sampled_from(TABLE + ["eq_3step"]), st.integers(0, 2 ** 16))
def test_torsion_reconstruction(ref, seed):
    entry = catalog.load(ref)
    A = np.eye(7) + 0.15 * np.random.default_rng(seed).normal(size=(7, 7))
    gs = G2Structure(act_on_form(A, PHI0), entry.algebra)
    tc = torsion(gs)
    phi, sphi, m = gs.phi, gs.star_phi, gs.metric
    rebuilt = tc.tau0 * sphi + 3 * wedge(tc.tau1, phi) + hodge(tc.tau3, m)
    assert (gs.d_phi - rebuilt).norm() <= 1e-9 * tc.scale
    rebuilt = 4 * wedge(tc.tau1, sphi) + wedge(tc.tau2, phi)
    assert (gs.d_star_phi - rebuilt).norm() <= 1e-9 * tc.scale
    assert wedge(tc.tau3, phi).norm() <= 1e-9 * tc.scale
    assert wedge(tc.tau3, sphi).norm() <= 1e-9 * tc.scale
    assert wedge(tc.tau2, sphi).norm() <= 1e-9 * tc.scale


@pytest.mark.parametrize("ref", TABLE)
def test_conformal_check_is_exact(ref):
    entry = catalog.load(ref)
    rep = conformal_parallel_check(entry.g2(), entry.params["m"])
    assert rep.passed
    assert rep.d_phi.is_zero() and rep.d_star_phi.is_zero()


def test_conformal_check_fails_for_wrong_m():
    entry = catalog.load("table_row2")
    assert not conformal_parallel_check(entry.g2(), Fraction(-1, 2)).passed


def test_conformal_check_fails_for_three_step():
    gs = catalog.load("eq_3step").g2()
    assert not conformal_parallel_check(gs, -1).passed
