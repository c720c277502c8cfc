"""G2-structures on seven-dimensional Lie algebras and their intrinsic torsion."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .coeff import ScalarExpr
from .errors import (InconsistentTau1, NonPositiveType, SingularMetric, Tau2NonZero)
from .exterior import Form, FrameMetric, basis, hodge, interior, wedge
from .lie import LieAlgebra, ce_d
from .su3 import SU3Structure

PHI0 = Form.from_labels(7, {"147": 1, "237": -1, "567": 1, "125": 1, "136": 1, "246": 1, "345": -1})
EPS_CLASS = 1e-8
TAU1_TOL = 1e-9


def exactify(x: Form) -> Form:
    """Replace float coefficients that are integers by ints so symbolic sums cancel exactly."""
    def conv(c):
        if isinstance(c, float) and c.is_integer():
            return int(c)
        return c
    return x.map_coeffs(conv)


def lift(x: Form, dim: int = 7) -> Form:
    """View a form on the first n directions as a form on a larger frame."""
    return Form(dim, x.degree, x.terms)


def restrict(x: Form, dim: int = 6) -> Form:
    """Drop every term that involves a direction >= dim."""
    return Form(dim, x.degree, {I: c for I, c in x.items() if all(i < dim for i in I)})


def metric_from_phi(phi: Form) -> FrameMetric:
    """Metric and orientation induced by a positive 3-form.

    B(X, Y) vol0 = (1/6) (X _| phi) ^ (Y _| phi) ^ phi with vol0 = e^{1..7};
    B is definite for a positive form and its sign fixes the orientation.
    Then g = B det(B)^(-1/9).
    """
    if phi.dim != 7 or phi.degree != 3:
        raise ValueError("metric_from_phi needs a 3-form in dimension 7")
    contr = [interior(i, phi) for i in range(7)]
    top = tuple(range(7))
    B = np.zeros((7, 7))
    for i in range(7):
        ci = wedge(contr[i], phi)
        for j in range(i, 7):
            v = float(wedge(contr[j], ci)[top]) / 6.0
            B[i, j] = B[j, i] = v
    w = np.linalg.eigvalsh(B)
    scale = max(np.abs(w).max(), 1e-300)
    if np.all(w > 1e-12 * scale):
        orientation = 1
    elif np.all(w < -1e-12 * scale):
        orientation = -1
        B = -B
    else:
        raise NonPositiveType("3-form is not of positive type (B is indefinite or degenerate)")
    det = float(np.linalg.det(B))
    if det <= 0:
        raise NonPositiveType("3-form is degenerate")
    g = B * det ** (-1.0 / 9.0)
    # unit entries are common; snap tiny float noise so exact comparisons hold
    snapped = np.where(np.abs(g - np.round(g)) < 1e-14, np.round(g), g)
    return FrameMetric(snapped, orientation)


@dataclass
class G2Structure:
    phi: Form
    algebra: LieAlgebra = field(default_factory=lambda: LieAlgebra([{}] * 7, name="abelian7"))

    def __post_init__(self):
        if self.algebra.dim != 7:
            raise ValueError("G2-structures live on 7-dimensional algebras")
        self.metric = metric_from_phi(self.phi)
        self.star_phi = exactify(hodge(self.phi, self.metric))

    @property
    def g(self) -> np.ndarray:
        return self.metric.matrix()

    def star(self, x: Form) -> Form:
        return hodge(x, self.metric)

    def d(self, x: Form) -> Form:
        return ce_d(self.algebra, x)

    @property
    def d_phi(self) -> Form:
        return self.d(self.phi)

    @property
    def d_star_phi(self) -> Form:
        return self.d(self.star_phi)


def build_phi(s: SU3Structure, algebra: LieAlgebra | None = None) -> G2Structure:
    """phi = omega ^ e^7 + psi+.  Without an explicit 7-dimensional algebra the
    extension is the direct sum with a line (e^7 closed, e_7 central)."""
    if algebra is None:
        algebra = LieAlgebra(list(s.algebra.d) + [{}], name=(s.algebra.name or "n") + "+R")
    e7 = Form(7, 1, {(6,): 1})
    phi = wedge(lift(s.omega), e7) + lift(s.psi_plus)
    return G2Structure(phi, algebra)


def su3_from_g2(gs: G2Structure, h: int = 6) -> SU3Structure:
    """omega = e_7 _| phi and psi+ = phi - omega ^ e^7, on the complement of e_7."""
    if h != 6:
        raise NotImplementedError("the distinguished direction must be the last frame vector")
    omega7 = interior(h, gs.phi)
    e7 = Form(7, 1, {(h,): 1})
    psi7 = gs.phi - wedge(omega7, e7)
    base = LieAlgebra([{k: v for k, v in row.items() if h not in k} for row in gs.algebra.d[:h]],
                      name=gs.algebra.name)
    return SU3Structure(restrict(omega7), restrict(psi7), base)


# -- torsion ----------------------------------------------------------------------

def _matrix_of(fn: Callable[[Form], Form], dim: int, deg_in: int, deg_out: int) -> np.ndarray:
    B = basis(dim, deg_in)
    cols = [fn(Form(dim, deg_in, {I: 1})).to_array() if deg_out <= dim else np.zeros(0) for I in B]
    return np.array(cols).T.reshape(-1, len(B))


@dataclass
class TorsionComponents:
    tau0: float
    tau1: Form
    tau2: Form
    tau3: Form
    residuals: tuple[float, float]
    ranks: tuple[int, int]
    tau1_gap: float
    scale: float

    def to_dict(self) -> dict:
        return {"tau0": self.tau0, "tau1": self.tau1.to_json(), "tau2": self.tau2.to_json(),
                "tau3": self.tau3.to_json(), "residuals": list(self.residuals),
                "ranks": list(self.ranks), "tau1_gap": self.tau1_gap}


def _chop_array(a: np.ndarray, eps: float) -> np.ndarray:
    return np.where(np.abs(a) <= eps, 0.0, a)


def torsion(gs: G2Structure, tol: float = TAU1_TOL) -> TorsionComponents:
    """Solve dphi = t0 *phi + 3 t1^phi + *t3 and d*phi = 4 t1^*phi + t2^phi.

    t2 is constrained by t2 ^ *phi = 0, t3 by t3 ^ phi = 0 and t3 ^ *phi = 0.
    Both systems are square; the two estimates of t1 must agree.
    """
    phi, sphi, m = gs.phi, gs.star_phi, gs.metric
    dphi, dsphi = gs.d_phi, gs.d_star_phi
    scale = max(dphi.norm() + dsphi.norm(), 1e-300)

    # system 1: unknowns (t0 | t1[7] | t3[35]) -> Lambda^4 (35) + constraints 7 + 1
    A_t0 = sphi.to_array()[:, None]
    A_t1 = _matrix_of(lambda x: 3 * wedge(x, phi), 7, 1, 4)
    A_t3 = _matrix_of(lambda x: hodge(x, m), 7, 3, 4)
    C_phi = _matrix_of(lambda x: wedge(x, phi), 7, 3, 6)
    C_sphi = _matrix_of(lambda x: wedge(x, sphi), 7, 3, 7)
    top = np.hstack([A_t0, A_t1, A_t3])
    cons = np.hstack([np.zeros((C_phi.shape[0] + 1, 8)), np.vstack([C_phi, C_sphi])])
    M1 = np.vstack([top, cons])
    rhs1 = np.concatenate([dphi.to_array(), np.zeros(cons.shape[0])])
    sol1, *_ = np.linalg.lstsq(M1, rhs1, rcond=None)
    rank1 = int(np.linalg.matrix_rank(M1))

    # system 2: unknowns (t1[7] | t2[21]) -> Lambda^5 (21) + constraint 7
    B_t1 = _matrix_of(lambda x: 4 * wedge(x, sphi), 7, 1, 5)
    B_t2 = _matrix_of(lambda x: wedge(x, phi), 7, 2, 5)
    D_t2 = _matrix_of(lambda x: wedge(x, sphi), 7, 2, 6)
    M2 = np.vstack([np.hstack([B_t1, B_t2]), np.hstack([np.zeros((7, 7)), D_t2])])
    rhs2 = np.concatenate([dsphi.to_array(), np.zeros(7)])
    sol2, *_ = np.linalg.lstsq(M2, rhs2, rcond=None)
    rank2 = int(np.linalg.matrix_rank(M2))

    t1a, t1b = sol1[1:8], sol2[:7]
    gap = float(np.abs(t1a - t1b).max()) / max(1.0, scale)
    if gap > tol:
        raise InconsistentTau1(f"tau1 estimates differ by {gap:.3g} (relative)")
    eps = 1e-13 * max(1.0, scale)
    tau0 = float(_chop_array(sol1[:1], eps)[0])
    tau1 = Form.from_array(7, 1, _chop_array(0.5 * (t1a + t1b), eps))
    tau3 = Form.from_array(7, 3, _chop_array(sol1[8:], eps))
    tau2 = Form.from_array(7, 2, _chop_array(sol2[7:], eps))

    r1 = (dphi - (tau0 * sphi + 3 * wedge(tau1, phi) + hodge(tau3, m))).norm() / scale
    r2 = (dsphi - (4 * wedge(tau1, sphi) + wedge(tau2, phi))).norm() / scale
    return TorsionComponents(tau0, tau1, tau2, tau3, (r1, r2), (rank1, rank2), gap, scale)


@dataclass(frozen=True)
class FGClass:
    components: frozenset

    @property
    def label(self) -> str:
        if not self.components:
            return "parallel"
        return "+".join(f"T{i}" for i in sorted(self.components))

    def __str__(self):
        return self.label


def fg_class(tc: TorsionComponents, eps: float = EPS_CLASS) -> FGClass:
    """Vanishing pattern of (tau0, tau1, tau2, tau3) relative to |dphi| + |d*phi|."""
    thr = eps * tc.scale
    norms = [abs(tc.tau0), tc.tau1.norm(), tc.tau2.norm(), tc.tau3.norm()]
    return FGClass(frozenset(i for i, v in enumerate(norms) if v > thr))


def skew_torsion(gs: G2Structure, tc: TorsionComponents, eps: float = EPS_CLASS) -> Form:
    """T = 7/6 t0 phi - *dphi + *(4 t1 ^ phi); defined only when t2 = 0."""
    if tc.tau2.norm() > eps * tc.scale:
        raise Tau2NonZero(f"|tau2| = {tc.tau2.norm():.3g}; no connection with skew torsion")
    T = (7.0 / 6.0) * tc.tau0 * gs.phi - gs.star(gs.d_phi) + gs.star(4 * wedge(tc.tau1, gs.phi))
    return T.chop(1e-13 * max(1.0, tc.scale))


# -- conformal rescaling ---------------------------------------------------------

def d_time(algebra: LieAlgebra, x: Form, h: int = 6) -> Form:
    """d of a form whose ScalarExpr coefficients depend on t, with e^h = dt."""
    et = Form(x.dim, 1, {(h,): 1})
    const_part: dict[tuple[int, ...], object] = {}
    out = Form.zero(x.dim, min(x.degree + 1, x.dim))
    if x.degree == x.dim:
        return out
    for I, c in x.items():
        if isinstance(c, ScalarExpr):
            out = out + wedge(et, Form(x.dim, x.degree, {I: c.ddt()}))
            for J, v in ce_d(algebra, Form(x.dim, x.degree, {I: 1})).items():
                const_part[J] = const_part[J] + v * c if J in const_part else v * c
        else:
            for J, v in ce_d(algebra, Form(x.dim, x.degree, {I: c})).items():
                const_part[J] = const_part[J] + v if J in const_part else v
    return out + Form(x.dim, x.degree + 1, const_part)


@dataclass
class ConformalReport:
    passed: bool
    d_phi: Form
    d_star_phi: Form
    m: object

    def to_dict(self) -> dict:
        return {"passed": self.passed, "m": float(self.m),
                "residual_dphi": self.d_phi.to_json(), "residual_dstarphi": self.d_star_phi.to_json()}


def conformal_parallel_check(gs: G2Structure, m, h: int = 6) -> ConformalReport:
    """Rescale by f = -m t (e^h = dt): phi~ = e^{3f} phi, *~phi~ = e^{4f} *phi; both must be closed."""
    if gs.algebra.d[h]:
        raise ValueError("the time direction must be closed")
    m = Fraction(m) if isinstance(m, (int, Fraction)) else m
    phi_t = exactify(gs.phi) * ScalarExpr.exp(-3 * m)
    sphi_t = gs.star_phi * ScalarExpr.exp(-4 * m)
    r1 = d_time(gs.algebra, phi_t, h)
    r2 = d_time(gs.algebra, sphi_t, h)
    return ConformalReport(r1.is_zero() and r2.is_zero(), r1, r2, m)
