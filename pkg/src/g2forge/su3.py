"""SU(3)-structures on six-dimensional Lie algebras.

A stable 3-form rho of negative type determines an almost complex structure
through Hitchin's construction: K(X) is defined by (X _| rho) ^ rho = K(X) _| vol
and J = K / sqrt(-lambda) with lambda = tr(K^2) / 6.  J acts on forms by
pullback, which sends the standard psi+ to the standard psi-.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import NonSymmetric, SingularMetric, UnstableForm
from .exterior import Form, FrameMetric, basis, basis_index, compound, interior, wedge
from .lie import LieAlgebra, ce_d

# psi+ ^ psi- = NORMALIZATION * omega^3 for the standard structure
NORMALIZATION = 2.0 / 3.0
STABILITY_EPS = 1e-10

OMEGA0 = Form.from_labels(6, {"14": 1, "23": -1, "56": 1})
PSI_PLUS0 = Form.from_labels(6, {"125": 1, "345": -1, "136": 1, "246": 1})
PSI_MINUS0 = Form.from_labels(6, {"126": 1, "135": -1, "245": -1, "346": -1})


@lru_cache(maxsize=None)
def _k_tensor() -> np.ndarray:
    """Q[j, i, a, b] with K(rho)[j, i] = sum_ab Q[j,i,a,b] rho_a rho_b for vol = e^{123456}."""
    n = 6
    B3 = basis(n, 3)
    Q = np.zeros((n, n, len(B3), len(B3)))
    for a, I in enumerate(B3):
        ea = Form(n, 3, {I: 1})
        for b, J in enumerate(B3):
            eb = Form(n, 3, {J: 1})
            for i in range(n):
                five = wedge(interior(i, ea), eb)
                for K, c in five.items():
                    (j,) = set(range(n)) - set(K)
                    # e_j _| e^{123456} = (-1)^j e^{K}
                    Q[j, i, a, b] += c * (-1) ** j
    Q.setflags(write=False)
    return Q


def _vol_scale(vol: Form | None) -> float:
    if vol is None:
        return 1.0
    if vol.dim != 6 or vol.degree != 6:
        raise ValueError("vol must be a 6-form on a 6-dimensional frame")
    v = float(vol[(0, 1, 2, 3, 4, 5)])
    if v == 0:
        raise ValueError("vol must be nonzero")
    return v


def hitchin_k(rho: Form, vol: Form | None = None) -> np.ndarray:
    if rho.dim != 6 or rho.degree != 3:
        raise ValueError("hitchin_j needs a 3-form in dimension 6")
    r = rho.to_array()
    return np.einsum("jiab,a,b->ji", _k_tensor(), r, r) / _vol_scale(vol)


def hitchin_lambda(rho: Form, vol: Form | None = None) -> float:
    K = hitchin_k(rho, vol)
    return float(np.trace(K @ K)) / 6.0


def hitchin_j(rho: Form, vol: Form | None = None) -> tuple[np.ndarray, float]:
    """Return (J, lambda).  J acts on column vectors; J @ J = -I."""
    K = hitchin_k(rho, vol)
    lam = float(np.trace(K @ K)) / 6.0
    scale = max(np.abs(rho.to_array()).max(), 1e-300) ** 4 / _vol_scale(vol) ** 2
    if lam >= -STABILITY_EPS * scale:
        raise UnstableForm(f"lambda = {lam:.3g} is not negative")
    return K / np.sqrt(-lam), lam


def act_on_form(A: np.ndarray, x: Form) -> Form:
    """Pullback x(A., ..., A.) of a form by a linear map of the frame."""
    if x.degree == 0:
        return x
    C = compound(np.asarray(A, float), x.degree)
    return Form.from_array(x.dim, x.degree, C.T @ x.to_array())


def two_form_matrix(omega: Form) -> np.ndarray:
    n = omega.dim
    O = np.zeros((n, n))
    for (i, j), c in omega.items():
        O[i, j] = float(c)
        O[j, i] = -float(c)
    return O


def matrix_two_form(O: np.ndarray) -> Form:
    n = O.shape[0]
    return Form(n, 2, {(i, j): float(O[i, j]) for i in range(n) for j in range(i + 1, n) if O[i, j] != 0})


def metric_matrix(omega: Form, J: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """h(X, Y) = omega(X, JY).  Raises NonSymmetric when omega is not J-invariant."""
    h = two_form_matrix(omega) @ J
    scale = max(1.0, np.abs(h).max())
    if np.abs(h - h.T).max() > tol * scale:
        raise NonSymmetric("omega(., J.) is not symmetric; omega is not of type (1,1)")
    return 0.5 * (h + h.T)


def metric_from(omega: Form, J: np.ndarray) -> FrameMetric:
    return FrameMetric(metric_matrix(omega, J))


def _default_algebra() -> LieAlgebra:
    return LieAlgebra([{}] * 6, name="abelian6")


@dataclass
class SU3Structure:
    """(omega, psi+) on a 6-dimensional Lie algebra, with the derived J, psi-, h."""

    omega: Form
    psi_plus: Form
    algebra: LieAlgebra = field(default_factory=_default_algebra)

    def __post_init__(self):
        if self.omega.dim != 6 or self.omega.degree != 2:
            raise ValueError("omega must be a 2-form in dimension 6")
        if self.psi_plus.dim != 6 or self.psi_plus.degree != 3:
            raise ValueError("psi_plus must be a 3-form in dimension 6")
        if self.algebra.dim != 6:
            raise ValueError("SU(3)-structures live on 6-dimensional algebras")
        self.J, self.lam = hitchin_j(self.psi_plus)
        self.psi_minus = act_on_form(self.J, self.psi_plus)

    @property
    def h(self) -> np.ndarray:
        return metric_matrix(self.omega, self.J)

    @property
    def metric(self) -> FrameMetric:
        return metric_from(self.omega, self.J)

    def d(self, x: Form) -> Form:
        return ce_d(self.algebra, x)


@dataclass
class SU3Report:
    compatible: bool
    normalized: bool
    positive: bool
    residuals: dict[str, float]

    @property
    def passed(self) -> bool:
        return self.compatible and self.normalized and self.positive

    def to_dict(self) -> dict:
        return {"compatible": self.compatible, "normalized": self.normalized,
                "positive": self.positive, "residuals": self.residuals}


def _top(x: Form) -> float:
    return float(x[tuple(range(x.dim))]) if not x.is_zero() else 0.0


def normalization_ratio(s: SU3Structure) -> float:
    w3 = _top(wedge(wedge(s.omega, s.omega), s.omega))
    if w3 == 0:
        return float("inf")
    return _top(wedge(s.psi_plus, s.psi_minus)) / w3


def su3_checks(s: SU3Structure, tol: float = 1e-10) -> SU3Report:
    scale_w = max(s.omega.norm(), 1e-300)
    scale_p = max(s.psi_plus.norm(), 1e-300)
    r_plus = wedge(s.psi_plus, s.omega).norm() / (scale_w * scale_p)
    r_minus = wedge(s.psi_minus, s.omega).norm() / (scale_w * s.psi_minus.norm())
    ratio = normalization_ratio(s)
    r_norm = abs(ratio - NORMALIZATION) if np.isfinite(ratio) else float("inf")
    try:
        h = s.h
        positive = bool(np.linalg.eigvalsh(h).min() > tol)
        r_sym = 0.0
    except NonSymmetric:
        positive = False
        r_sym = float("inf")
    return SU3Report(
        compatible=r_plus <= tol and r_minus <= tol and r_sym == 0.0,
        normalized=r_norm <= 1e-9,
        positive=positive,
        residuals={"psi_plus^omega": r_plus, "psi_minus^omega": r_minus,
                   "normalization": r_norm, "ratio": ratio},
    )


def nijenhuis(algebra: LieAlgebra, J: np.ndarray) -> np.ndarray:
    """N[k, i, j] = component k of [Je_i, Je_j] - J[Je_i, e_j] - J[e_i, Je_j] - [e_i, e_j]."""
    c = algebra.structure
    JJ = np.einsum("kab,ai,bj->kij", c, J, J)
    A = np.einsum("kab,ai->kib", c, J)
    B = np.einsum("kab,bj->kaj", c, J)
    return JJ - np.einsum("lk,kij->lij", J, A + B) - c


def class_predicates(s: SU3Structure, tol: float = 1e-10) -> dict[str, bool]:
    dw = s.d(s.omega)
    dp = s.d(s.psi_plus)
    dm = s.d(s.psi_minus)
    dw2 = s.d(wedge(s.omega, s.omega))
    scale = max([1.0] + [abs(float(v)) for row in s.algebra.d for v in row.values()])

    def small(x: Form) -> bool:
        return x.norm() <= tol * scale

    N = nijenhuis(s.algebra, s.J)
    return {
        "torsion_free": small(dw) and small(dp) and small(dm),
        "half_flat": small(dp) and small(dw2),
        "symplectic": small(dw),
        "complex": bool(np.abs(N).max(initial=0.0) <= tol * scale),
    }
