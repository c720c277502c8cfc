"""Levi-Civita connection, curvature and holonomy estimates.

Two backends share the same conventions:

* left-invariant metrics on a Lie algebra, via the Koszul formula;
* orthonormal coframes theta^a = f_a(t) e^a whose scale factors are ScalarExpr
  functions of a time coordinate t with dt = e^h.

Connection matrices N[i] represent nabla_{e_i}: nabla_{e_i} e_j = sum_k N[i][k, j] e_k,
and R[i, j] is the endomorphism R(e_i, e_j) = [nabla_i, nabla_j] - nabla_{[e_i, e_j]}.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coeff import ScalarExpr
from .errors import NotOrthonormal, SingularMetric, UnresolvableStructureFunctions
from .exterior import Form, FrameMetric, interior, wedge
from .lie import LieAlgebra

EPS_EINSTEIN = 1e-9
RANK_TOL = 1e-8
DEFAULT_SAMPLES = (0.0, 0.25, 0.5, 1.0)


def _metric_matrix(algebra: LieAlgebra, g) -> np.ndarray:
    if g is None:
        return np.eye(algebra.dim)
    G = g.matrix() if isinstance(g, FrameMetric) else np.asarray(g, float)
    if G.shape != (algebra.dim, algebra.dim):
        raise ValueError("metric size does not match the algebra")
    if abs(np.linalg.det(G)) < 1e-300:
        raise SingularMetric("singular metric")
    return G


def koszul_connection(algebra: LieAlgebra, g=None) -> np.ndarray:
    """N[i, k, j] = e^k(nabla_{e_i} e_j) for a left-invariant metric."""
    c = algebra.structure
    G = _metric_matrix(algebra, g)
    # lower[i, j, k] = <[e_i, e_j], e_k>
    lower = np.einsum("lij,lk->ijk", c, G)
    # 2<nabla_i e_j, e_k> = <[i,j],k> - <[j,k],i> + <[k,i],j>
    gam = 0.5 * (lower - np.einsum("jki->ijk", lower) + np.einsum("kij->ijk", lower))
    return np.einsum("kl,ijl->ikj", np.linalg.inv(G), gam)


def riemann_from_connection(N: np.ndarray, c: np.ndarray, dN: np.ndarray | None = None) -> np.ndarray:
    """R[i, j] = E_i(N_j) - E_j(N_i) + [N_i, N_j] - sum_k c[k,i,j] N_k."""
    R = np.einsum("ipq,jqr->ijpr", N, N)
    R = R - R.transpose(1, 0, 2, 3) - np.einsum("kij,kpr->ijpr", c, N)
    if dN is not None:
        R = R + dN - dN.transpose(1, 0, 2, 3)
    return R


def riemann(algebra: LieAlgebra, g=None) -> np.ndarray:
    return riemann_from_connection(koszul_connection(algebra, g), algebra.structure)


def ricci_tensor(R: np.ndarray) -> np.ndarray:
    """Ric(e_j, e_k) = trace of X -> R(X, e_j) e_k."""
    return np.einsum("ijik->jk", R)


@dataclass
class CurvatureReport:
    ricci: np.ndarray
    scalar_curv: float
    einstein_constant: float | None
    residual: float
    holonomy_dim: int | None = None
    in_g2: bool | None = None
    t: float | None = None

    @property
    def is_einstein(self) -> bool:
        return self.einstein_constant is not None

    def to_dict(self) -> dict:
        out = {"ricci": np.round(self.ricci, 12).tolist(), "scalar_curvature": self.scalar_curv,
               "einstein_lambda": self.einstein_constant, "einstein_residual": self.residual,
               "eps_einstein": EPS_EINSTEIN}
        if self.t is not None:
            out["t"] = self.t
        if self.holonomy_dim is not None:
            out["holonomy_dim"] = self.holonomy_dim
            out["in_g2"] = self.in_g2
        return out


def einstein_report(Ric: np.ndarray, G: np.ndarray, eps: float = EPS_EINSTEIN, t=None) -> CurvatureReport:
    n = G.shape[0]
    Ric = 0.5 * (Ric + Ric.T)
    scal = float(np.trace(np.linalg.solve(G, Ric)))
    lam = scal / n
    size = np.linalg.norm(Ric)
    res = float(np.linalg.norm(Ric - lam * G))
    rel = res / size if size > 0 else 0.0
    ok = size == 0 or rel <= eps or res <= 1e-12
    return CurvatureReport(Ric, scal, lam if ok else None, rel, t=t)


def ricci(algebra: LieAlgebra, g=None, eps: float = EPS_EINSTEIN) -> CurvatureReport:
    G = _metric_matrix(algebra, g)
    return einstein_report(ricci_tensor(riemann(algebra, G)), G, eps)


# -- time-dependent orthonormal coframes --------------------------------------------

@dataclass
class Coframe:
    """theta^a = scales[a] * e^a on an algebra whose direction h is dt."""
    algebra: LieAlgebra
    scales: tuple
    h: int = 6

    @classmethod
    def from_forms(cls, algebra: LieAlgebra, forms: Sequence[Form], h: int = 6) -> Coframe:
        scales = []
        for a, f in enumerate(forms):
            if f.degree != 1 or f.dim != algebra.dim:
                raise NotOrthonormal("coframe entries must be 1-forms on the algebra")
            if len(f) != 1 or next(iter(f.terms)) != (a,):
                raise UnresolvableStructureFunctions(
                    f"coframe entry {a + 1} is not a multiple of e^{a + 1}")
            scales.append(ScalarExpr.coerce(f[(a,)]))
        return cls(algebra, tuple(scales), h)

    @classmethod
    def conformal(cls, algebra: LieAlgebra, m, h: int = 6) -> Coframe:
        """theta^a = e^{-mt} e^a, orthonormal for e^{-2mt} sum (e^a)^2."""
        f = ScalarExpr.exp(-m)
        return cls(algebra, (f,) * algebra.dim, h)

    def __post_init__(self):
        n = self.algebra.dim
        if len(self.scales) != n:
            raise NotOrthonormal("need one scale factor per frame direction")
        self.scales = tuple(ScalarExpr.coerce(s) for s in self.scales)
        if any(s.is_zero() for s in self.scales):
            raise NotOrthonormal("zero scale factor")
        if self.algebra.d[self.h]:
            raise UnresolvableStructureFunctions("the time 1-form must be closed")
        for s in self.scales:
            if not s.is_monomial():
                raise UnresolvableStructureFunctions(f"scale factor {s!r} has no inverse in the coefficient ring")

    def structure_functions(self) -> list[list[list[ScalarExpr]]]:
        """c[k][i][j] with [E_i, E_j] = sum_k c[k][i][j] E_k for the dual frame E_a."""
        n, h = self.algebra.dim, self.h
        f = self.scales
        inv = [s.reciprocal() for s in f]
        zero = ScalarExpr()
        c = [[[zero] * n for _ in range(n)] for _ in range(n)]

        def put(k, i, j, v):
            # d theta^k gets v * theta^{ij}, hence c^k_{ij} = -v
            c[k][i][j] = c[k][i][j] - v
            c[k][j][i] = c[k][j][i] + v

        for k in range(n):
            if k != h:
                dk = f[k].ddt()
                if not dk.is_zero():
                    put(k, h, k, dk * inv[h] * inv[k])
            for (i, j), v in self.algebra.d[k].items():
                put(k, i, j, f[k] * inv[i] * inv[j] * v)
        return c

    def connection(self):
        """Symbolic N[i][k][j] and E_i(N) as nested lists of ScalarExpr."""
        n = self.algebra.dim
        c = self.structure_functions()
        half = ScalarExpr.const(0.5)
        N = [[[ScalarExpr()] * n for _ in range(n)] for _ in range(n)]
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    v = c[k][i][j] - c[i][j][k] + c[j][k][i]
                    if not v.is_zero():
                        N[i][k][j] = v * half
        inv_h = self.scales[self.h].reciprocal()
        dN = [[[ScalarExpr()] * n for _ in range(n)] for _ in range(n)]
        for i in range(n):
            for k in range(n):
                for j in range(n):
                    v = N[i][k][j]
                    if not v.is_zero():
                        dN[i][k][j] = v.ddt() * inv_h
        return c, N, dN

    def evaluate(self, t: float):
        """Numeric (c, N, E(N)) at time t; E(N)[a, i] = E_a(N_i)."""
        n, h = self.algebra.dim, self.h
        c, N, dN = self._symbolic()
        cn = np.array([[[x.eval(t) for x in row] for row in mat] for mat in c])
        Nn = np.array([[[x.eval(t) for x in row] for row in mat] for mat in N])
        D = np.zeros((n, n, n, n))
        D[h] = np.array([[[x.eval(t) for x in row] for row in mat] for mat in dN])
        return cn, Nn, D

    def _symbolic(self):
        if not hasattr(self, "_sym"):
            self._sym = self.connection()
        return self._sym

    def riemann(self, t: float) -> np.ndarray:
        c, N, D = self.evaluate(t)
        return riemann_from_connection(N, c, D)

    def metric(self) -> FrameMetric:
        return FrameMetric.diagonal([s * s for s in self.scales])


@dataclass
class CoframeCurvature:
    samples: tuple
    riemann: list[np.ndarray]
    reports: list[CurvatureReport]

    @property
    def max_ricci(self) -> float:
        return max(float(np.abs(r.ricci).max()) for r in self.reports)

    def curvature_forms(self, k: int) -> list[list[Form]]:
        """Omega^a_b at sample k as 2-forms in the orthonormal coframe."""
        R = self.riemann[k]
        n = R.shape[0]
        return [[Form(n, 2, {(i, j): float(R[i, j, a, b]) for i in range(n) for j in range(i + 1, n)
                              if R[i, j, a, b] != 0}) for b in range(n)] for a in range(n)]


def coframe_curvature(coframe: Coframe | Sequence[Form], samples: Sequence[float] = DEFAULT_SAMPLES,
                      algebra: LieAlgebra | None = None, eps: float = EPS_EINSTEIN) -> CoframeCurvature:
    if not isinstance(coframe, Coframe):
        if algebra is None:
            raise ValueError("an algebra is needed to differentiate a coframe given as forms")
        coframe = Coframe.from_forms(algebra, coframe)
    n = coframe.algebra.dim
    Rs, reports = [], []
    for t in samples:
        R = coframe.riemann(t)
        Rs.append(R)
        reports.append(einstein_report(ricci_tensor(R), np.eye(n), eps, t=t))
    return CoframeCurvature(tuple(samples), Rs, reports)


# -- holonomy ------------------------------------------------------------------------

def _skew_vec(A: np.ndarray) -> np.ndarray:
    iu = np.triu_indices(A.shape[0], 1)
    return A[iu]


def _skew_mat(v: np.ndarray, n: int) -> np.ndarray:
    A = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    A[iu] = v
    return A - A.T


def _span(vectors: np.ndarray, tol: float) -> np.ndarray:
    if len(vectors) == 0:
        return vectors
    u, s, vt = np.linalg.svd(vectors, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return vectors[:0]
    r = int((s > tol * s[0]).sum())
    return vt[:r]


def derivation_action(A: np.ndarray, x: Form) -> Form:
    """A . x for A in gl(n) acting on covectors by -A^T, extended as a derivation."""
    n = x.dim
    out = Form.zero(n, x.degree)
    for i in range(n):
        ix = interior(i, x)
        if ix.is_zero():
            continue
        for j in range(n):
            if A[i, j] != 0:
                out = out - float(A[i, j]) * wedge(Form(n, 1, {(j,): 1}), ix)
    return out


@dataclass
class HolonomyReport:
    dim: int
    in_g2: bool
    generators: list[np.ndarray] = field(repr=False)
    status: str = "ok"

    def to_dict(self) -> dict:
        return {"holonomy_dim": self.dim, "in_g2": self.in_g2, "status": self.status,
                "rank_tol": RANK_TOL}


def holonomy_span(curvatures: Sequence[np.ndarray], phi: Form | None = None,
                  tol: float = RANK_TOL, expected: int | None = None) -> HolonomyReport:
    """Lie closure of the span of the curvature operators R(e_i, e_j).

    ``curvatures`` holds R arrays of shape (n, n, n, n), one per sample.
    """
    n = curvatures[0].shape[-1]
    vecs = []
    for R in curvatures:
        for i in range(n):
            for j in range(i + 1, n):
                A = R[i, j]
                vecs.append(_skew_vec(0.5 * (A - A.T)))
    vecs = np.array(vecs)
    scale = np.abs(vecs).max(initial=0.0)
    if scale <= 1e-12:
        return HolonomyReport(0, True, [], "ok")
    basis_ = _span(vecs, tol)
    while True:
        mats = [_skew_mat(v, n) for v in basis_]
        new = [basis_]
        for a in range(len(mats)):
            for b in range(a + 1, len(mats)):
                C = mats[a] @ mats[b] - mats[b] @ mats[a]
                new.append(_skew_vec(C)[None, :])
        grown = _span(np.vstack(new), tol)
        if len(grown) == len(basis_):
            break
        basis_ = grown
    gens = [_skew_mat(v, n) for v in basis_]
    in_g2 = None
    if phi is not None:
        pn = phi.norm()
        in_g2 = all(derivation_action(A, phi).norm() <= 1e-8 * np.linalg.norm(A) * pn for A in gens)
    status = "ok"
    if expected is not None and len(gens) < expected:
        status = "inconclusive"
    return HolonomyReport(len(gens), bool(in_g2) if in_g2 is not None else False, gens, status)
