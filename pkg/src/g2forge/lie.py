"""Lie algebras given by their Chevalley-Eilenberg differential on 1-forms.

Convention: de^k(X, Y) = -e^k([X, Y]), so ``de^3 = e^15`` means [e_5, e_1] = e_3.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Number, Rational
from typing import Mapping, Sequence

import numpy as np
import sympy

from .errors import JacobiFailed, NotDerivation, ParseError, SchemaError
from .exterior import Form, basis, basis_index, sort_sign

Table = tuple  # tuple of dicts {(i, j): coeff} with i < j, one per basis 1-form


def _is_exact(c) -> bool:
    return isinstance(c, (int, Fraction)) or (isinstance(c, Rational) and not isinstance(c, bool))


def _d_raw(table: Table, terms: Mapping[tuple[int, ...], object]) -> dict[tuple[int, ...], object]:
    """Leibniz extension of the 1-form differential to an arbitrary form."""
    out: dict[tuple[int, ...], object] = {}
    for I, c in terms.items():
        for pos, i in enumerate(I):
            for (j, k), v in table[i].items():
                s, K = sort_sign(I[:pos] + (j, k) + I[pos + 1:])
                if not s:
                    continue
                val = v * c
                if (s < 0) ^ (pos % 2 == 1):
                    val = -val
                out[K] = out[K] + val if K in out else val
    return out


class LieAlgebra:
    """Structure constants of an n-dimensional Lie algebra, n <= 8.

    ``d[k]`` maps (i, j) with i < j to the coefficient of e^{ij} in de^k.
    Coefficients are numbers; Fractions keep every identity exact.  When the
    algebra comes from a parametrised description, ``symbolic`` holds the
    unbound sympy coefficients and ``params`` the bindings used for ``d``.
    """

    def __init__(self, d: Sequence, name: str | None = None,
                 symbolic: Sequence | None = None, params: Mapping[str, object] | None = None):
        table = []
        dims = set()
        for entry in d:
            if isinstance(entry, Form):
                dims.add(entry.dim)
                if entry.degree != 2 and not entry.is_zero():
                    raise SchemaError("differentials of 1-forms must be 2-forms")
                table.append({I: c for I, c in entry.items()})
            else:
                row = {}
                for (i, j), c in dict(entry).items():
                    s, key = sort_sign((i, j))
                    if s and c != 0:
                        row[key] = row.get(key, 0) + s * c
                table.append({k: v for k, v in row.items() if v != 0})
        self.dim = len(table)
        if dims and dims != {self.dim}:
            raise SchemaError("differential forms live on a frame of the wrong dimension")
        for row in table:
            for (i, j) in row:
                if not (0 <= i < j < self.dim):
                    raise SchemaError(f"index pair {(i + 1, j + 1)} out of range")
        self.d: Table = tuple(table)
        self.name = name
        self.symbolic = tuple(symbolic) if symbolic is not None else None
        self.params = dict(params or {})
        self._cache: dict = {}

    # -- construction helpers ------------------------------------------
    @classmethod
    def from_labels(cls, rows: Sequence[Mapping[str, object]], name: str | None = None) -> LieAlgebra:
        """``from_labels([{}, {}, {"15": 1}, ...])`` with 1-based labels."""
        d = []
        for row in rows:
            entry = {}
            for lbl, c in row.items():
                if len(lbl) != 2 or not lbl.isdigit():
                    raise ParseError(f"bad 2-form label {lbl!r}")
                i, j = int(lbl[0]) - 1, int(lbl[1]) - 1
                s, key = sort_sign((i, j))
                if not s:
                    raise ParseError(f"degenerate label {lbl!r}")
                entry[key] = entry.get(key, 0) + s * c
            d.append(entry)
        return cls(d, name=name)

    @classmethod
    def parse(cls, text: str, params: Mapping[str, object] | None = None,
              name: str | None = None) -> LieAlgebra:
        """Parse the tuple notation ``(0, 0, e15, e25, 0, e12)``.

        Components may carry coefficients and parameters, e.g.
        ``-3/5*m*e17 + 2/5*m*(e15 - e46)``.
        """
        body = text.strip()
        if body.startswith("(") and body.endswith(")"):
            body = body[1:-1]
        comps = [c.strip() for c in body.split(",")]
        n = len(comps)
        symbolic = []
        for comp in comps:
            symbolic.append(_parse_component(comp, n))
        return from_symbolic(symbolic, params or {}, name=name)

    # -- brackets -------------------------------------------------------
    @property
    def structure(self) -> np.ndarray:
        """c[k, i, j] with [e_i, e_j] = sum_k c[k, i, j] e_k."""
        if "c" not in self._cache:
            n = self.dim
            c = np.zeros((n, n, n))
            for k, row in enumerate(self.d):
                for (i, j), v in row.items():
                    c[k, i, j] = -float(v)
                    c[k, j, i] = float(v)
            c.setflags(write=False)
            self._cache["c"] = c
        return self._cache["c"]

    def bracket_exact(self, i: int, j: int) -> dict[int, object]:
        """[e_i, e_j] with the stored coefficient type."""
        out = {}
        if i == j:
            return out
        s, key = sort_sign((i, j))
        for k, row in enumerate(self.d):
            v = row.get(key)
            if v is not None:
                out[k] = -v if s > 0 else v
        return out

    def bracket(self, x, y) -> np.ndarray:
        return np.einsum("kij,i,j->k", self.structure, np.asarray(x, float), np.asarray(y, float))

    def ad(self, x) -> np.ndarray:
        """Matrix of ad_x acting on column vectors."""
        if isinstance(x, (int, np.integer)):
            return self.structure[:, x, :].copy()
        return np.einsum("kij,i->kj", self.structure, np.asarray(x, float))

    def is_exact(self) -> bool:
        return all(_is_exact(v) for row in self.d for v in row.values())

    # -- differential ---------------------------------------------------
    def d_form(self, k: int) -> Form:
        return Form(self.dim, 2, self.d[k])

    def d_matrix(self, k: int) -> np.ndarray:
        """Dense matrix of d: Lambda^k -> Lambda^{k+1} in the lexicographic bases."""
        key = ("dm", k)
        if key not in self._cache:
            n = self.dim
            B = basis(n, k)
            out_idx = basis_index(n, k + 1) if k < n else {}
            M = np.zeros((len(out_idx), len(B)))
            for col, I in enumerate(B):
                for K, v in _d_raw(self.d, {I: 1}).items():
                    M[out_idx[K], col] += float(v)
            M.setflags(write=False)
            self._cache[key] = M
        return self._cache[key]

    def bind(self, **params) -> LieAlgebra:
        if self.symbolic is None:
            raise ValueError("algebra has no symbolic description to rebind")
        merged = dict(self.params)
        merged.update(params)
        return from_symbolic(self.symbolic, merged, name=self.name)

    def __repr__(self):
        comps = []
        for row in self.d:
            if not row:
                comps.append("0")
            else:
                comps.append(" + ".join(f"{v}*e{i + 1}{j + 1}" for (i, j), v in sorted(row.items())))
        return f"LieAlgebra(({', '.join(comps)}))"


# -- symbolic descriptions ---------------------------------------------------

_LABEL = re.compile(r"e(\d)(\d)")


@lru_cache(maxsize=None)
def _sym(name: str) -> sympy.Symbol:
    return sympy.Symbol(name, real=True)


def _parse_component(comp: str, n: int) -> dict[tuple[int, int], sympy.Expr]:
    if comp in ("", "0"):
        return {}
    labels = {}

    def repl(mt):
        i, j = int(mt.group(1)) - 1, int(mt.group(2)) - 1
        if not (0 <= i < n and 0 <= j < n):
            raise SchemaError(f"label e{mt.group(1)}{mt.group(2)} out of range for dimension {n}")
        name = f"E_{i}_{j}"
        labels[name] = (i, j)
        return name

    expr_text = _LABEL.sub(repl, comp)
    try:
        expr = sympy.sympify(expr_text, locals={k: _sym(k) for k in labels})
        expr = sympy.expand(expr.subs({x: _sym(x.name) for x in expr.free_symbols}))
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ParseError(f"cannot parse component {comp!r}") from exc
    out: dict[tuple[int, int], sympy.Expr] = {}
    for name, (i, j) in labels.items():
        c = expr.coeff(_sym(name))
        s, key = sort_sign((i, j))
        if not s:
            raise ParseError(f"degenerate label in {comp!r}")
        out[key] = out.get(key, 0) + s * c
    rest = expr.subs({_sym(nm): 0 for nm in labels})
    if rest != 0:
        raise ParseError(f"component {comp!r} is not a combination of 2-forms")
    return {k: v for k, v in out.items() if v != 0}


@lru_cache(maxsize=4096)
def parse_coefficient(text: str) -> sympy.Expr:
    try:
        return sympy.sympify(text, locals={"m": _sym("m"), "b": _sym("b")})
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ParseError(f"cannot parse coefficient {text!r}") from exc


def exact_param(value) -> sympy.Expr:
    """Bind a user-supplied number as an exact rational when it is a finite decimal."""
    if isinstance(value, sympy.Basic):
        return value
    if isinstance(value, (int, Fraction)):
        return sympy.Rational(value)
    return sympy.Rational(Fraction(repr(float(value))))


def to_number(expr: sympy.Expr):
    """Fraction for rational expressions, float otherwise."""
    expr = sympy.nsimplify(expr) if isinstance(expr, sympy.Float) else expr
    if expr.is_Rational:
        return Fraction(int(expr.p), int(expr.q))
    if expr.free_symbols:
        raise SchemaError(f"unbound parameter(s) {sorted(map(str, expr.free_symbols))} in {expr}")
    return float(expr)


def from_symbolic(symbolic: Sequence[Mapping[tuple[int, int], sympy.Expr]], params: Mapping[str, object],
                  name: str | None = None) -> LieAlgebra:
    subs = {_sym(k): exact_param(v) for k, v in params.items()}
    d = []
    for row in symbolic:
        d.append({key: to_number(sympy.sympify(c).subs(subs)) for key, c in row.items()})
    return LieAlgebra(d, name=name, symbolic=symbolic, params=params)


# -- Jacobi identity -----------------------------------------------------------

@dataclass
class JacobiReport:
    passed: bool
    exact: bool
    witness: int | None = None          # 0-based index k with d(de^k) != 0
    residual: Form | None = None

    def __bool__(self):
        return self.passed


def jacobi_check(algebra: LieAlgebra, tol: float = 1e-12) -> JacobiReport:
    """d(de^k) = 0 for every k.  Exact when the constants are rational or symbolic."""
    n = algebra.dim
    if algebra.symbolic is not None:
        table = tuple({k: sympy.sympify(v) for k, v in row.items()} for row in algebra.symbolic)
        for k in range(n):
            dd = _d_raw(table, table[k])
            res = {I: sympy.expand(v) for I, v in dd.items()}
            res = {I: v for I, v in res.items() if v != 0}
            if res:
                return JacobiReport(False, True, k, Form(n, 3, {I: to_number_or_expr(v) for I, v in res.items()}))
        return JacobiReport(True, True)
    exact = algebra.is_exact()
    for k in range(n):
        dd = _d_raw(algebra.d, algebra.d[k])
        if exact:
            res = {I: v for I, v in dd.items() if v != 0}
        else:
            scale = max((abs(float(v)) for row in algebra.d for v in row.values()), default=1.0) ** 2
            res = {I: v for I, v in dd.items() if abs(float(v)) > tol * max(scale, 1.0)}
        if res:
            return JacobiReport(False, exact, k, Form(n, 3, res))
    return JacobiReport(True, exact)


def to_number_or_expr(v):
    try:
        return to_number(v)
    except SchemaError:
        return v


def require_jacobi(algebra: LieAlgebra) -> None:
    rep = jacobi_check(algebra)
    if not rep:
        raise JacobiFailed(f"d^2 e^{rep.witness + 1} = {rep.residual}", witness=rep.witness)


def ce_d(algebra: LieAlgebra, x: Form) -> Form:
    """Chevalley-Eilenberg differential of a left-invariant form (coefficients are constants)."""
    if x.dim != algebra.dim:
        raise ValueError("form and algebra dimensions differ")
    if x.degree == x.dim:
        return Form.zero(x.dim, x.dim)
    return Form(x.dim, x.degree + 1, _d_raw(algebra.d, x.terms))


# -- nilpotency ------------------------------------------------------------------

@dataclass
class CentralSeries:
    dims: list[int]
    step: int | None          # None when the series stabilises above zero

    @property
    def nilpotent(self) -> bool:
        return self.step is not None


def _exact_table(algebra: LieAlgebra):
    if algebra.symbolic is not None:
        subs = {_sym(k): exact_param(v) for k, v in algebra.params.items()}
        return [{k: sympy.sympify(v).subs(subs) for k, v in row.items()} for row in algebra.symbolic]
    if algebra.is_exact():
        return [{k: sympy.Rational(v) for k, v in row.items()} for row in algebra.d]
    return None


def lower_central_series(algebra: LieAlgebra, tol: float = 1e-10) -> CentralSeries:
    """Dimensions of g = g^0 > g^1 = [g, g] > g^2 = [g^1, g] > ..."""
    n = algebra.dim
    table = _exact_table(algebra)
    if table is not None:
        # C[i][j] = exact bracket vector of [e_i, e_j]
        C = [[[0] * n for _ in range(n)] for _ in range(n)]
        for k, row in enumerate(table):
            for (i, j), v in row.items():
                C[i][j][k] -= v
                C[j][i][k] += v
        current = sympy.eye(n)
        dims = [n]
        while True:
            vecs = []
            for r in range(current.rows):
                v = current.row(r)
                for j in range(n):
                    vecs.append([sum(v[i] * C[i][j][k] for i in range(n)) for k in range(n)])
            M = sympy.Matrix(vecs) if vecs else sympy.zeros(0, n)
            rref, piv = M.rref()
            nxt = rref[: len(piv), :]
            dims.append(len(piv))
            if len(piv) == 0:
                return CentralSeries(dims, len(dims) - 1)
            if len(piv) == dims[-2]:
                return CentralSeries(dims, None)
            current = nxt
    c = algebra.structure
    current = np.eye(n)
    dims = [n]
    while True:
        vecs = np.einsum("kij,ri->rjk", c, current).reshape(-1, n)
        if vecs.size == 0 or np.abs(vecs).max() <= tol:
            dims.append(0)
            return CentralSeries(dims, len(dims) - 1)
        u, s, vt = np.linalg.svd(vecs)
        rank = int((s > tol * s[0]).sum())
        dims.append(rank)
        if rank == dims[-2]:
            return CentralSeries(dims, None)
        current = vt[:rank]


def is_unimodular(algebra: LieAlgebra) -> bool:
    """tr ad_X = 0 for every X."""
    n = algebra.dim
    for i in range(n):
        tr = 0
        for k in range(n):
            tr += algebra.bracket_exact(i, k).get(k, 0)
        if (tr != 0) if algebra.is_exact() else abs(float(tr)) > 1e-12:
            return False
    return True


# -- rank-one solvable extensions --------------------------------------------

def _as_matrix(D) -> list[list]:
    rows = [list(r) for r in D]
    if any(len(r) != len(rows) for r in rows):
        raise ValueError("derivation must be a square matrix")
    return rows


def derivation_defect(algebra: LieAlgebra, D) -> tuple[tuple[int, int], list] | None:
    """First basis pair (i, j) where D[e_i,e_j] != [De_i,e_j] + [e_i,De_j], with the defect."""
    D = _as_matrix(D)
    n = algebra.dim
    exact = algebra.is_exact() and all(_is_exact(v) for r in D for v in r)

    def col(j):
        return {i: D[i][j] for i in range(n) if D[i][j] != 0}

    def br(x: dict, y: dict) -> list:
        out = [0] * n
        for i, a in x.items():
            for j, b in y.items():
                for k, v in algebra.bracket_exact(i, j).items():
                    out[k] += a * b * v
        return out

    for i in range(n):
        for j in range(i + 1, n):
            lhs_vec = algebra.bracket_exact(i, j)
            lhs = [sum(D[k][l] * lhs_vec.get(l, 0) for l in range(n)) for k in range(n)]
            r1 = br(col(i), {j: 1})
            r2 = br({i: 1}, col(j))
            defect = [lhs[k] - r1[k] - r2[k] for k in range(n)]
            bad = any(v != 0 for v in defect) if exact else max(abs(float(v)) for v in defect) > 1e-12
            if bad:
                return (i, j), defect
    return None


@dataclass
class SolvExtension:
    base: LieAlgebra
    derivation: list
    m: object
    result: LieAlgebra

    @property
    def ad_h(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.derivation])


def solvable_extension(base: LieAlgebra, D, m=None, name: str | None = None) -> SolvExtension:
    """s = n + R e_{n+1} with [e_{n+1}, X] = D(X); e^{n+1} is closed."""
    D = _as_matrix(D)
    n = base.dim
    if len(D) != n:
        raise ValueError("derivation size does not match the base algebra")
    bad = derivation_defect(base, D)
    if bad is not None:
        (i, j), defect = bad
        raise NotDerivation(f"D fails the Leibniz rule on (e{i + 1}, e{j + 1})", witness=(i, j))
    h = n
    rows = []
    for i in range(n):
        row = dict(base.d[i])
        for j in range(n):
            if D[i][j] != 0:
                row[(j, h)] = row.get((j, h), 0) + D[i][j]
        rows.append(row)
    rows.append({})
    return SolvExtension(base, D, m, LieAlgebra(rows, name=name))


@dataclass
class EigenvalueType:
    eigenvalues: list
    multiplicities: list[int]
    diagonalizable: bool = True

    def scaled(self) -> list[float]:
        """Eigenvalues normalised so the smallest has absolute value 1."""
        base = min(abs(float(v)) for v in self.eigenvalues)
        return [float(v) / base for v in self.eigenvalues]


def eigenvalue_type(D, tol: float = 1e-9) -> EigenvalueType:
    D = _as_matrix(D)
    if all(_is_exact(v) for r in D for v in r):
        M = sympy.Matrix([[sympy.Rational(v) for v in r] for r in D])
        ev = M.eigenvals()
        if all(v.is_real for v in ev):
            items = sorted(ev.items(), key=lambda kv: float(kv[0]))
            vals = [Fraction(int(v.p), int(v.q)) if v.is_Rational else float(v) for v, _ in items]
            return EigenvalueType(vals, [int(k) for _, k in items], bool(M.is_diagonalizable()))
    A = np.array([[float(v) for v in r] for r in D])
    w = np.linalg.eigvals(A)
    if np.abs(w.imag).max(initial=0) > tol:
        return EigenvalueType(sorted(w.real.tolist()), [1] * len(w), False)
    w = np.sort(w.real)
    vals, mult = [], []
    for x in w:
        if vals and abs(x - vals[-1]) <= tol * max(1.0, abs(x)):
            mult[-1] += 1
        else:
            vals.append(float(x))
            mult.append(1)
    rank_ok = all(
        np.linalg.matrix_rank(A - v * np.eye(len(A)), tol=1e-8) == len(A) - k for v, k in zip(vals, mult))
    return EigenvalueType(vals, mult, rank_ok)


@dataclass
class IwasawaReport:
    nonzero: bool
    self_adjoint: bool
    positive: bool

    @property
    def passed(self) -> bool:
        return self.nonzero and self.self_adjoint and self.positive

    def __bool__(self):
        return self.passed


def iwasawa_check(ext: SolvExtension, metric=None, tol: float = 1e-10) -> IwasawaReport:
    """ad_H self-adjoint for the metric on n and positive-definite there."""
    A = ext.ad_h
    n = A.shape[0]
    g = np.eye(n) if metric is None else np.asarray(getattr(metric, "g", metric), float)[:n, :n]
    S = g @ A
    self_adj = np.allclose(S, S.T, atol=tol * max(1.0, np.abs(S).max()))
    pos = self_adj and bool(np.linalg.eigvalsh(0.5 * (S + S.T)).min() > tol)
    return IwasawaReport(bool(np.abs(A).max() > 0), bool(self_adj), pos)
