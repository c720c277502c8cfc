"""Exterior algebra on a frame of dimension n <= 8.

Forms are sparse maps from strictly increasing index tuples to coefficients.
Coefficients are plain numbers (int, Fraction, float) or ScalarExpr; all
operations use ordinary arithmetic so either kind works.  Indices are
0-based internally; ``Form.from_labels`` and the JSON format use the 1-based
labels that appear in e^{147}-style notation.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from numbers import Number
from typing import Iterable, Mapping, Sequence

import numpy as np

from .coeff import ScalarExpr
from .errors import ParseError, SchemaError, SingularMetric

MAX_DIM = 8


def is_zero(c) -> bool:
    if isinstance(c, ScalarExpr):
        return c.is_zero()
    return c == 0


def to_float(c, t: float | None = None) -> float:
    if isinstance(c, ScalarExpr):
        if t is None:
            return float(c.constant_value())
        return c.eval(t)
    return float(c)


def sort_sign(idx: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Sign of the permutation sorting ``idx``; 0 if an index repeats."""
    idx = list(idx)
    if len(set(idx)) != len(idx):
        return 0, ()
    sign = 1
    for i in range(1, len(idx)):
        j = i
        while j > 0 and idx[j - 1] > idx[j]:
            idx[j - 1], idx[j] = idx[j], idx[j - 1]
            sign = -sign
            j -= 1
    return sign, tuple(idx)


@lru_cache(maxsize=None)
def basis(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    """Lexicographically ordered k-subsets of range(n); the dense basis of Lambda^k."""
    return tuple(combinations(range(n), k))


@lru_cache(maxsize=None)
def basis_index(n: int, k: int) -> dict[tuple[int, ...], int]:
    return {I: p for p, I in enumerate(basis(n, k))}


@lru_cache(maxsize=None)
def wedge_tensor(n: int, k1: int, k2: int) -> np.ndarray:
    """T[a, b, c] with e^{I_a} ^ e^{J_b} = sum_c T[a,b,c] e^{K_c}."""
    B1, B2 = basis(n, k1), basis(n, k2)
    out_index = basis_index(n, k1 + k2) if k1 + k2 <= n else {}
    T = np.zeros((len(B1), len(B2), max(len(out_index), 1)))
    if k1 + k2 > n:
        return T[:, :, :0]
    for a, I in enumerate(B1):
        for b, J in enumerate(B2):
            s, K = sort_sign(I + J)
            if s:
                T[a, b, out_index[K]] = s
    T.setflags(write=False)
    return T


@lru_cache(maxsize=None)
def complement_sign(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    """For each I in basis(n, k): the complement and sign of e^I ^ e^{I^c}."""
    out = []
    full = set(range(n))
    for I in basis(n, k):
        Ic = tuple(sorted(full - set(I)))
        s, _ = sort_sign(I + Ic)
        out.append((Ic, s))
    return tuple(out)


def _label_to_index(label: str | Sequence[int], dim: int) -> tuple[int, ...]:
    if isinstance(label, str):
        digits = label.strip().lstrip("e")
        if not digits:
            return ()
        if not digits.isdigit():
            raise ParseError(f"bad index label {label!r}")
        idx = tuple(int(ch) - 1 for ch in digits)
    else:
        idx = tuple(int(i) - 1 for i in label)
    if any(i < 0 or i >= dim for i in idx):
        raise SchemaError(f"index {label!r} out of range for dimension {dim}")
    return idx


class Form:
    """Immutable exterior k-form on an n-dimensional frame."""

    __slots__ = ("dim", "degree", "_c")

    def __init__(self, dim: int, degree: int, coeffs: Mapping[Sequence[int], object] | None = None):
        if not 0 <= dim <= MAX_DIM:
            raise ValueError(f"frame dimension {dim} outside 0..{MAX_DIM}")
        if not 0 <= degree <= dim:
            raise ValueError(f"degree {degree} outside 0..{dim}")
        self.dim = dim
        self.degree = degree
        acc: dict[tuple[int, ...], object] = {}
        for idx, c in (coeffs or {}).items():
            idx = tuple(idx)
            if len(idx) != degree:
                raise ValueError(f"index {idx} has wrong length for a {degree}-form")
            if any(i < 0 or i >= dim for i in idx):
                raise ValueError(f"index {idx} out of range for dimension {dim}")
            s, key = sort_sign(idx)
            if not s or is_zero(c):
                continue
            acc[key] = acc[key] + s * c if key in acc else s * c
        self._c = {k: v for k, v in acc.items() if not is_zero(v)}

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, dim: int, degree: int) -> Form:
        return cls(dim, degree)

    @classmethod
    def scalar(cls, dim: int, c) -> Form:
        return cls(dim, 0, {(): c})

    @classmethod
    def from_labels(cls, dim: int, terms: Mapping[str, object]) -> Form:
        """``Form.from_labels(7, {"147": 1, "237": -1})`` with 1-based digit labels."""
        items = [(_label_to_index(lbl, dim), c) for lbl, c in terms.items()]
        degrees = {len(i) for i, _ in items}
        if len(degrees) > 1:
            raise SchemaError("mixed degrees in one form")
        degree = degrees.pop() if degrees else 0
        return cls(dim, degree, dict(_merge(items)))

    @classmethod
    def from_array(cls, dim: int, degree: int, arr) -> Form:
        return cls(dim, degree, {I: float(v) for I, v in zip(basis(dim, degree), arr) if v != 0})

    # -- access -------------------------------------------------------
    def items(self):
        return self._c.items()

    @property
    def terms(self) -> dict[tuple[int, ...], object]:
        return dict(self._c)

    def __getitem__(self, idx) -> object:
        if isinstance(idx, str):
            idx = _label_to_index(idx, self.dim)
        s, key = sort_sign(tuple(idx))
        return s * self._c.get(key, 0) if s else 0

    def __len__(self):
        return len(self._c)

    def is_zero(self) -> bool:
        return not self._c

    def is_symbolic(self) -> bool:
        return any(isinstance(c, ScalarExpr) for c in self._c.values())

    def to_array(self) -> np.ndarray:
        idx = basis_index(self.dim, self.degree)
        out = np.zeros(len(idx))
        for I, c in self._c.items():
            out[idx[I]] = to_float(c)
        return out

    def map_coeffs(self, fn) -> Form:
        return Form(self.dim, self.degree, {I: fn(c) for I, c in self._c.items()})

    def at(self, t: float) -> Form:
        """Evaluate ScalarExpr coefficients at time t."""
        return self.map_coeffs(lambda c: to_float(c, t))

    def norm(self) -> float:
        """Euclidean norm of the coefficient vector (numeric coefficients)."""
        return math.sqrt(sum(to_float(c) ** 2 for c in self._c.values()))

    def chop(self, eps: float) -> Form:
        return Form(self.dim, self.degree,
                    {I: c for I, c in self._c.items() if abs(to_float(c)) > eps})

    def allclose(self, other: Form, atol: float = 1e-12) -> bool:
        return self.dim == other.dim and self.degree == other.degree and (self - other).norm() <= atol

    # -- algebra ------------------------------------------------------
    def _check(self, other: Form):
        if not isinstance(other, Form):
            raise TypeError(f"expected Form, got {type(other).__name__}")
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch {self.dim} vs {other.dim}")

    def __add__(self, other: Form) -> Form:
        if isinstance(other, Number) and other == 0:
            return self
        self._check(other)
        if other.degree != self.degree:
            raise ValueError(f"cannot add a {self.degree}-form and a {other.degree}-form")
        acc = dict(self._c)
        for I, c in other._c.items():
            acc[I] = acc[I] + c if I in acc else c
        return Form(self.dim, self.degree, acc)

    __radd__ = __add__

    def __neg__(self) -> Form:
        return Form(self.dim, self.degree, {I: -c for I, c in self._c.items()})

    def __sub__(self, other: Form) -> Form:
        return self + (-other)

    def __mul__(self, c) -> Form:
        if isinstance(c, Form):
            return wedge(self, c)
        if isinstance(c, (Number, ScalarExpr)):
            return Form(self.dim, self.degree, {I: v * c for I, v in self._c.items()})
        return NotImplemented

    def __rmul__(self, c) -> Form:
        if isinstance(c, (Number, ScalarExpr)):
            return Form(self.dim, self.degree, {I: c * v for I, v in self._c.items()})
        return NotImplemented

    def __truediv__(self, c) -> Form:
        if isinstance(c, (int, Fraction)):
            c = Fraction(c)
        return self * (1 / c)

    def __xor__(self, other: Form) -> Form:
        return wedge(self, other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Form):
            return NotImplemented
        return (self.dim, self.degree, self._c) == (other.dim, other.degree, other._c)

    def __hash__(self):
        return hash((self.dim, self.degree, frozenset(self._c.items())))

    def __repr__(self) -> str:
        if not self._c:
            return f"Form(dim={self.dim}, degree={self.degree}, 0)"
        parts = []
        for I in sorted(self._c):
            lbl = "e" + "".join(str(i + 1) for i in I) if I else "1"
            parts.append(f"{self._c[I]}*{lbl}")
        return f"Form(dim={self.dim}, " + " + ".join(parts) + ")"

    # -- serialization ------------------------------------------------
    def to_json(self) -> dict:
        def enc(c):
            if isinstance(c, ScalarExpr):
                return c.to_json()
            if isinstance(c, Fraction):
                return str(c) if c.denominator != 1 else int(c)
            return c
        return {"dim": self.dim, "degree": self.degree,
                "terms": [{"idx": [i + 1 for i in I], "c": enc(self._c[I])} for I in sorted(self._c)]}

    @classmethod
    def from_json(cls, data: Mapping) -> Form:
        try:
            dim = int(data["dim"])
            degree = int(data["degree"])
            terms = data["terms"]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed form JSON: {exc}") from exc
        items = []
        for t in terms:
            try:
                raw = t["idx"]
                c = t["c"]
            except (KeyError, TypeError) as exc:
                raise SchemaError(f"malformed form term {t!r}") from exc
            if len(raw) != degree:
                raise SchemaError(f"term {raw} does not have degree {degree}")
            idx = _label_to_index(raw, dim)
            if list(idx) != sorted(set(idx)):
                raise SchemaError(f"multi-index {raw} is not strictly increasing")
            if isinstance(c, Mapping):
                c = ScalarExpr.from_json(c)
            elif isinstance(c, str):
                try:
                    c = Fraction(c)
                except ValueError as exc:
                    raise SchemaError(f"bad coefficient {c!r}") from exc
            items.append((idx, c))
        return cls(dim, degree, dict(_merge(items)))


def _merge(items: Iterable[tuple[tuple[int, ...], object]]):
    acc: dict[tuple[int, ...], object] = {}
    for idx, c in items:
        s, key = sort_sign(idx)
        if not s:
            continue
        acc[key] = acc[key] + s * c if key in acc else s * c
    return acc.items()


def e(dim: int, label: str) -> Form:
    """Basis form, ``e(7, "147")`` is e^1 ^ e^4 ^ e^7."""
    return Form.from_labels(dim, {label: 1})


def wedge(x: Form, y: Form) -> Form:
    x._check(y)
    if x.degree + y.degree > x.dim:
        return Form.zero(x.dim, x.dim)
    acc: dict[tuple[int, ...], object] = {}
    for I, a in x._c.items():
        for J, b in y._c.items():
            s, K = sort_sign(I + J)
            if not s:
                continue
            v = a * b if s > 0 else -(a * b)
            acc[K] = acc[K] + v if K in acc else v
    return Form(x.dim, x.degree + y.degree, acc)


def wedge_all(*forms: Form) -> Form:
    out = forms[0]
    for f in forms[1:]:
        out = wedge(out, f)
    return out


def interior(v, x: Form) -> Form:
    """Contraction v _| x in the first slot.  ``v`` is a 0-based frame index or a vector."""
    if x.degree == 0:
        return Form.zero(x.dim, 0)
    if isinstance(v, (int, np.integer)):
        vec = {int(v): 1}
    else:
        vec = {i: c for i, c in enumerate(v) if not is_zero(c)}
        if len(v) != x.dim:
            raise ValueError("vector length does not match form dimension")
    acc: dict[tuple[int, ...], object] = {}
    for I, c in x._c.items():
        for pos, i in enumerate(I):
            if i not in vec:
                continue
            K = I[:pos] + I[pos + 1:]
            val = vec[i] * c
            if pos % 2:
                val = -val
            acc[K] = acc[K] + val if K in acc else val
    return Form(x.dim, x.degree - 1, acc)


def compound(A: np.ndarray, k: int) -> np.ndarray:
    """k-th compound matrix: minors det A[I, J] over the Lambda^k basis."""
    n = A.shape[0]
    B = basis(n, k)
    if k == 0:
        return np.ones((1, 1))
    C = np.empty((len(B), len(B)))
    for a, I in enumerate(B):
        rows = A[list(I)]
        for b, J in enumerate(B):
            C[a, b] = np.linalg.det(rows[:, list(J)]) if k > 1 else rows[0, J[0]]
    return C


class FrameMetric:
    """Inner product on the frame plus an orientation sign.

    ``g`` is either a numeric symmetric matrix or a diagonal of ScalarExpr
    entries (time-dependent conformal and warped metrics).
    """

    def __init__(self, g, orientation: int = 1, samples: Sequence[float] = (0.0, 0.5, 1.0)):
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        self.orientation = orientation
        if _has_expr(g):
            rows = [list(r) for r in g]
            n = len(rows)
            for i in range(n):
                for j in range(n):
                    if i != j and not is_zero(rows[i][j]):
                        raise NotImplementedError("symbolic metrics must be diagonal")
            self.diag = tuple(ScalarExpr.coerce(rows[i][i]) for i in range(n))
            self.g = None
            self.n = n
            for t in samples:
                if any(d.eval(t) <= 0 for d in self.diag):
                    raise SingularMetric(f"metric not positive-definite at t={t}")
        else:
            g = np.array(g, dtype=float)
            if g.ndim != 2 or g.shape[0] != g.shape[1]:
                raise ValueError("metric must be a square matrix")
            if not np.array_equal(g, g.T):
                if np.allclose(g, g.T, atol=1e-12 * max(1.0, np.abs(g).max())):
                    g = 0.5 * (g + g.T)
                else:
                    raise ValueError("metric is not symmetric")
            try:
                np.linalg.cholesky(g)
            except np.linalg.LinAlgError as exc:
                raise SingularMetric("metric is not positive-definite") from exc
            self.g = g
            self.diag = None
            self.n = g.shape[0]

    @classmethod
    def euclidean(cls, n: int, orientation: int = 1) -> FrameMetric:
        return cls(np.eye(n), orientation)

    @classmethod
    def diagonal(cls, entries: Sequence, orientation: int = 1) -> FrameMetric:
        n = len(entries)
        if any(isinstance(x, ScalarExpr) for x in entries):
            rows = [[entries[i] if i == j else 0 for j in range(n)] for i in range(n)]
            return cls(rows, orientation)
        return cls(np.diag(np.asarray(entries, dtype=float)), orientation)

    @property
    def is_symbolic(self) -> bool:
        return self.g is None

    def at(self, t: float) -> FrameMetric:
        if not self.is_symbolic:
            return self
        return FrameMetric(np.diag([d.eval(t) for d in self.diag]), self.orientation)

    def matrix(self) -> np.ndarray:
        if self.is_symbolic:
            raise ValueError("symbolic metric has no numeric matrix; use .at(t)")
        return self.g

    def gram(self, k: int):
        """Induced inner product on Lambda^k covectors (dense or diagonal list)."""
        if self.is_symbolic:
            inv = [d.reciprocal() for d in self.diag]
            out = []
            for I in basis(self.n, k):
                v = ScalarExpr.const(1)
                for i in I:
                    v = v * inv[i]
                out.append(v)
            return out
        return _gram_cached(self, k)

    def sqrt_det(self):
        if self.is_symbolic:
            v = ScalarExpr.const(1)
            for d in self.diag:
                v = v * d
            return v.sqrt()
        return math.sqrt(np.linalg.det(self.g))

    def volume_form(self) -> Form:
        return Form(self.n, self.n, {tuple(range(self.n)): self.orientation * self.sqrt_det()})

    def with_orientation(self, orientation: int) -> FrameMetric:
        out = object.__new__(FrameMetric)
        out.__dict__.update(self.__dict__)
        out.orientation = orientation
        return out

    def __repr__(self):
        body = self.diag if self.is_symbolic else self.g.tolist()
        return f"FrameMetric({body}, orientation={self.orientation})"


def _gram_cached(m: FrameMetric, k: int) -> np.ndarray:
    cache = m.__dict__.setdefault("_gram", {})
    if k not in cache:
        cache[k] = compound(np.linalg.inv(m.g), k)
    return cache[k]


def _has_expr(g) -> bool:
    if isinstance(g, np.ndarray) and g.dtype != object:
        return False
    return any(isinstance(x, ScalarExpr) for row in g for x in row)


def _apply_gram(x: Form, m: FrameMetric) -> dict[tuple[int, ...], object]:
    """Coefficients of the metric-raised form G_k x in the dense Lambda^k basis."""
    B = basis(x.dim, x.degree)
    idx = basis_index(x.dim, x.degree)
    G = m.gram(x.degree)
    if m.is_symbolic:
        return {I: G[idx[I]] * c for I, c in x.items()}
    if not x.is_symbolic():
        y = G @ x.to_array()
        return {B[a]: float(v) for a, v in enumerate(y) if v != 0}
    out: dict[tuple[int, ...], object] = {}
    for I, c in x.items():
        col = G[:, idx[I]]
        for a in np.nonzero(col)[0]:
            v = float(col[a]) * c
            out[B[a]] = out[B[a]] + v if B[a] in out else v
    return out


def hodge(x: Form, m: FrameMetric) -> Form:
    """Hodge star with x ^ *x = <x, x> vol."""
    if m.n != x.dim:
        raise ValueError("metric and form dimensions differ")
    if not m.is_symbolic and abs(np.linalg.det(m.g)) < 1e-300:
        raise SingularMetric("singular metric")
    raised = _apply_gram(x, m)
    scale = m.sqrt_det()
    comp = complement_sign(x.dim, x.degree)
    idx = basis_index(x.dim, x.degree)
    out: dict[tuple[int, ...], object] = {}
    for I, c in raised.items():
        Ic, s = comp[idx[I]]
        v = c * scale
        out[Ic] = v if s * m.orientation > 0 else -v
    return Form(x.dim, x.dim - x.degree, out)


def inner(x: Form, y: Form, m: FrameMetric | None = None):
    if x.degree != y.degree:
        raise ValueError("inner product needs equal degrees")
    x._check(y)
    if m is None:
        m = FrameMetric.euclidean(x.dim)
    raised = _apply_gram(x, m)
    total = 0
    for I, c in raised.items():
        d = y._c.get(I)
        if d is not None:
            total = total + c * d
    return total


def norm(x: Form, m: FrameMetric | None = None) -> float:
    return math.sqrt(to_float(inner(x, x, m)))
