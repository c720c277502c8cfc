"""Hitchin flow of invariant half-flat SU(3)-structures.

State variables are rho = psi+ and sigma = omega^2 / 2.  The evolution is

    d rho / dt = d omega,        d sigma / dt = -d psi-,

with omega recovered from sigma by Newton's method and psi- = J rho from
Hitchin's construction.  Everything runs on dense coefficient vectors in the
lexicographic bases of Lambda^k of a 6-dimensional Lie algebra.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .coeff import ScalarExpr
from .errors import NewtonDiverged, UnstableForm
from .exterior import Form, basis, basis_index, wedge, wedge_tensor
from .lie import LieAlgebra
from .su3 import STABILITY_EPS, _k_tensor, two_form_matrix

MAX_NEWTON = 50
NEWTON_TOL = 1e-12
BLOWUP = 1e12
SINGULAR_MARGIN = 1e-3


@lru_cache(maxsize=None)
def _lambda3_maps() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Scatter map from the 20 coefficients of a 3-form to its full 6x6x6 tensor, and back."""
    idx = np.zeros((6, 6, 6), dtype=int)
    sign = np.zeros((6, 6, 6))
    for a, (i, j, k) in enumerate(basis(6, 3)):
        for perm, s in (((i, j, k), 1), ((j, k, i), 1), ((k, i, j), 1),
                        ((j, i, k), -1), ((i, k, j), -1), ((k, j, i), -1)):
            idx[perm] = a
            sign[perm] = s
    flat = np.array([i * 36 + j * 6 + k for i, j, k in basis(6, 3)])
    return idx, sign, flat


@lru_cache(maxsize=None)
def _k_matrix() -> np.ndarray:
    # (36*20, 20) so that K = (Q @ r) reshaped, then contracted with r again
    return np.ascontiguousarray(_k_tensor().reshape(36 * 20, 20))


def j_and_psi_minus(r: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """(J, psi- coefficients, lambda) for a stable 3-form given by its 20 coefficients."""
    K = (_k_matrix() @ r).reshape(36, 20) @ r
    K = K.reshape(6, 6)
    lam = float(np.trace(K @ K)) / 6.0
    if lam >= -STABILITY_EPS * max(np.abs(r).max(), 1e-300) ** 4:
        raise UnstableForm(f"lambda = {lam:.3g} is not negative")
    J = K / math.sqrt(-lam)
    idx, sign, flat = _lambda3_maps()
    T = r[idx] * sign
    T = np.tensordot(T, J, axes=([2], [0]))             # a b k
    T = np.tensordot(T, J, axes=([1], [0]))             # a k j
    T = np.tensordot(T, J, axes=([0], [0]))             # k j i
    pm = T.transpose(2, 1, 0).reshape(-1)[flat]
    return J, pm, lam


@lru_cache(maxsize=None)
def _w22() -> np.ndarray:
    return np.ascontiguousarray(wedge_tensor(6, 2, 2).transpose(2, 0, 1))


def half_square(w: np.ndarray) -> np.ndarray:
    return 0.5 * ((_w22() @ w) @ w)


def omega_from_sigma_array(sigma: np.ndarray, guess: np.ndarray, tol: float = NEWTON_TOL,
                           max_iter: int = MAX_NEWTON) -> np.ndarray:
    W = _w22()
    w = np.array(guess, dtype=float)
    scale = max(np.linalg.norm(sigma), 1e-300)
    for _ in range(max_iter):
        res = half_square(w) - sigma
        if np.linalg.norm(res) <= tol * scale * 1e-3:
            return w
        jac = W @ w
        try:
            step = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError as exc:
            raise NewtonDiverged("degenerate omega in Newton iteration") from exc
        w = w - step
        if not np.all(np.isfinite(w)):
            break
        if np.linalg.norm(step) <= 1e-16 * max(1.0, np.linalg.norm(w)):
            break
    res = np.linalg.norm(half_square(w) - sigma)
    if not np.isfinite(res) or res > tol * scale:
        raise NewtonDiverged(f"Newton residual {res:.3g} after {max_iter} iterations")
    return w


def omega_from_sigma(sigma: Form, guess: Form) -> Form:
    """The 2-form omega near ``guess`` with omega^2 / 2 = sigma."""
    if sigma.dim != 6 or sigma.degree != 4 or guess.degree != 2:
        raise ValueError("omega_from_sigma works with a 4-form and a 2-form in dimension 6")
    w = omega_from_sigma_array(sigma.to_array(), guess.to_array())
    return Form.from_array(6, 2, w)


@dataclass
class FlowState:
    t: float
    rho: Form
    sigma: Form
    omega_guess: Form

    @classmethod
    def from_su3(cls, omega: Form, psi_plus: Form, t: float = 0.0) -> FlowState:
        return cls(t, psi_plus, 0.5 * wedge(omega, omega), omega)


class _Dense:
    """Precomputed differentials of an algebra in the dense bases."""

    def __init__(self, algebra: LieAlgebra):
        if algebra.dim != 6:
            raise ValueError("the flow runs on 6-dimensional algebras")
        self.d2 = np.asarray(algebra.d_matrix(2))
        self.d3 = np.asarray(algebra.d_matrix(3))
        self.d4 = np.asarray(algebra.d_matrix(4))
        self.W23 = np.ascontiguousarray(wedge_tensor(6, 2, 3).transpose(2, 0, 1))
        self.W33 = wedge_tensor(6, 3, 3)[:, :, 0]
        self.W42 = wedge_tensor(6, 4, 2)[:, :, 0]

    def rhs(self, r: np.ndarray, s: np.ndarray, guess: np.ndarray):
        w = omega_from_sigma_array(s, guess)
        J, pm, lam = j_and_psi_minus(r)
        return self.d2 @ w, -(self.d3 @ pm), w, pm, lam, J

    def monitors(self, r, s, w, pm, lam) -> dict[str, float]:
        top_w3 = 2.0 * float(half_square(w) @ self.W42 @ w)
        top_pp = float(r @ self.W33 @ pm)
        return {
            "closed_rho": float(np.linalg.norm(self.d3 @ r)),
            "closed_sigma": float(np.linalg.norm(self.d4 @ s)),
            "compat": float(np.linalg.norm((self.W23 @ r) @ w)),
            "ratio": top_pp / top_w3 if top_w3 else float("nan"),
            "lambda": lam,
        }


def flow_rhs(state: FlowState, algebra: LieAlgebra) -> tuple[Form, Form]:
    dense = _Dense(algebra)
    dr, ds, *_ = dense.rhs(state.rho.to_array(), state.sigma.to_array(), state.omega_guess.to_array())
    return Form.from_array(6, 3, dr), Form.from_array(6, 4, ds)


MONITORS = ("closed_rho", "closed_sigma", "compat", "ratio", "lambda")


@dataclass
class FlowSolution:
    times: np.ndarray
    rho: np.ndarray
    sigma: np.ndarray
    omega: np.ndarray
    J: np.ndarray
    monitors: dict[str, np.ndarray]
    status: str = "complete"
    reason: str = ""
    expected: dict[str, ScalarExpr] = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return self.status == "complete"

    def coefficient(self, key: str) -> np.ndarray:
        """Readout like ``rho:125``, ``sigma:1456``, ``omega:14`` or ``metric:11``."""
        name, _, label = key.partition(":")
        if name == "metric":
            i, j = int(label[0]) - 1, int(label[1]) - 1
            return np.array([g[i, j] for g in induced_g2_metric(self)])
        arr = {"rho": self.rho, "sigma": self.sigma, "omega": self.omega}[name]
        deg = {"rho": 3, "sigma": 4, "omega": 2}[name]
        idx = tuple(sorted(int(ch) - 1 for ch in label))
        sign = 1
        raw = [int(ch) - 1 for ch in label]
        for a in range(len(raw)):
            for b in range(a + 1, len(raw)):
                if raw[a] > raw[b]:
                    sign = -sign
        return sign * arr[:, basis_index(6, deg)[idx]]

    def state(self, k: int) -> FlowState:
        return FlowState(float(self.times[k]), Form.from_array(6, 3, self.rho[k]),
                         Form.from_array(6, 4, self.sigma[k]), Form.from_array(6, 2, self.omega[k]))

    def to_rows(self, tracked: Sequence[str]) -> tuple[list[str], list[list[float]]]:
        header = ["t"] + list(tracked) + list(MONITORS)
        cols = [self.times] + [self.coefficient(k) for k in tracked] + [self.monitors[m] for m in MONITORS]
        return header, [list(map(float, row)) for row in zip(*cols)]


def singular_time(m: float, margin: float = SINGULAR_MARGIN) -> float | None:
    """First t where 1 - m t reaches ``margin``."""
    if m == 0:
        return None
    return (1.0 - margin) / m


def integrate(initial: FlowState, algebra: LieAlgebra, t_end: float, h_step: float = 1e-3,
              m: float | None = None, expected: Mapping[str, ScalarExpr] | None = None) -> FlowSolution:
    """Fixed-step RK4 from initial.t to t_end (either direction)."""
    dense = _Dense(algebra)
    t0 = float(initial.t)
    span = t_end - t0
    status, reason = "complete", ""
    if m is not None:
        ts = singular_time(m)
        if ts is not None and (ts - t0) * span > 0 and abs(ts - t0) < abs(span):
            status = "singular"
            reason = f"1 - m t reaches {SINGULAR_MARGIN:g} at t = {ts:.6g} before t_end = {t_end:g}"
            span = ts - t0
    n_steps = max(1, int(math.ceil(abs(span) / h_step - 1e-9))) if span else 0
    h = span / n_steps if n_steps else 0.0

    r = initial.rho.to_array().astype(float)
    s = initial.sigma.to_array().astype(float)
    w = initial.omega_guess.to_array().astype(float)
    times, R, S, Wl, Js = [], [], [], [], []
    mons = {k: [] for k in MONITORS}

    def record(t, r, s, w_guess):
        dr, ds, w, pm, lam, J = dense.rhs(r, s, w_guess)
        times.append(t)
        R.append(r.copy())
        S.append(s.copy())
        Wl.append(w)
        Js.append(J)
        for k, v in dense.monitors(r, s, w, pm, lam).items():
            mons[k].append(v)
        return dr, ds, w

    try:
        k1r, k1s, w = record(t0, r, s, w)
        for step in range(n_steps):
            t = t0 + step * h
            k2r, k2s, w2, *_ = dense.rhs(r + 0.5 * h * k1r, s + 0.5 * h * k1s, w)
            k3r, k3s, w3, *_ = dense.rhs(r + 0.5 * h * k2r, s + 0.5 * h * k2s, w2)
            k4r, k4s, _, *_ = dense.rhs(r + h * k3r, s + h * k3s, w3)
            r = r + (h / 6.0) * (k1r + 2 * k2r + 2 * k3r + k4r)
            s = s + (h / 6.0) * (k1s + 2 * k2s + 2 * k3s + k4s)
            if max(np.abs(r).max(), np.abs(s).max()) > BLOWUP:
                status, reason = "blowup", f"coefficients exceed {BLOWUP:g} near t = {t + h:.6g}"
                break
            k1r, k1s, w = record(t0 + (step + 1) * h, r, s, w)
    except (UnstableForm, NewtonDiverged) as exc:
        status, reason = "unstable", f"{type(exc).__name__}: {exc}"

    return FlowSolution(np.array(times), np.array(R), np.array(S), np.array(Wl), np.array(Js),
                        {k: np.array(v) for k, v in mons.items()}, status, reason, dict(expected or {}))


def induced_g2_metric(solution: FlowSolution) -> list[np.ndarray]:
    """g = h(t) + dt^2 with h(X, Y) = omega(X, JY)."""
    out = []
    for w, J in zip(solution.omega, solution.J):
        h = two_form_matrix(Form.from_array(6, 2, w)) @ J
        g = np.eye(7)
        g[:6, :6] = 0.5 * (h + h.T)
        out.append(g)
    return out


def compare_closed_form(solution: FlowSolution, expected: Mapping[str, ScalarExpr] | None = None) -> dict[str, float]:
    """Sup-norm deviation of each tracked readout from its closed form."""
    expected = expected if expected is not None else solution.expected
    out = {}
    for key, expr in expected.items():
        vals = solution.coefficient(key)
        target = np.array([expr.eval(t) for t in solution.times])
        out[key] = float(np.abs(vals - target).max()) if len(vals) else 0.0
    return out


def is_exact(algebra: LieAlgebra, x: Form, tol: float = 1e-9) -> bool:
    """Whether x lies in the image of d on invariant forms."""
    if x.degree == 0:
        return x.is_zero()
    D = np.asarray(algebra.d_matrix(x.degree - 1))
    v = x.to_array()
    if not v.any():
        return True
    sol, *_ = np.linalg.lstsq(D, v, rcond=None)
    return float(np.linalg.norm(D @ sol - v)) <= tol * max(1.0, np.linalg.norm(v))


def levels_residual(p: float, q: float) -> float:
    """6((p+1)^{3/2} - 1) - (1 - (q+1)^{3/2}); a diagnostic only."""
    return 6.0 * ((p + 1.0) ** 1.5 - 1.0) - (1.0 - (q + 1.0) ** 1.5)


def levels_diagnostic(solution: FlowSolution, m: float) -> dict[str, object]:
    """Level-set residual along p = rho_125 - 1 and the displayed q = (6/5) m (1 - m t)^{1/2}.

    Not a pass/fail gate.  Where q + 1 < 0 the residual is undefined and the
    count of such samples is reported instead.
    """
    t = solution.times
    p = solution.coefficient("rho:125") - 1.0
    q = 1.2 * m * np.sqrt(np.clip(1.0 - m * t, 0.0, None))
    ok = (p + 1.0 >= 0) & (q + 1.0 >= 0)
    res = [abs(levels_residual(a, b)) for a, b in zip(p[ok], q[ok])]
    return {"max_residual": max(res) if res else None, "undefined_samples": int((~ok).sum()),
            "samples": int(len(t))}
