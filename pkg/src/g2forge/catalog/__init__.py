"""Registry of the algebras and structures studied by the package.

Each entry is one JSON file in this directory (or in the directory named by
``G2FORGE_CATALOG``).  ``manifest.json`` lists the ids with their provenance.
Parameters ``m`` and ``b`` stay symbolic in the files and are bound at load
time; the defaults are m = -1 and b = 1.  See ``docs/catalog.md`` for the
schema.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import sympy

from ..coeff import ScalarExpr
from ..errors import G2ForgeError, ParseError, SchemaError
from ..exterior import Form, FrameMetric, hodge, wedge
from ..lie import (LieAlgebra, exact_param, from_symbolic, lower_central_series, parse_coefficient,
                   require_jacobi, to_number)

DEFAULT_PARAMS = {"m": -1, "b": 1}
ENV_VAR = "G2FORGE_CATALOG"
MANIFEST = "manifest.json"

FLOW_TOL = 1e-6
EXPR_TOL = 1e-12
EINSTEIN_TOL = 1e-9

_REQUIRED = ("id", "provenance", "algebra")
_KNOWN = {"id", "provenance", "description", "params", "algebra", "structures", "flow", "extension",
          "einstein_model", "expected", "flags"}
_EXPECTED = {"nilpotent", "nilpotency_step", "fg_class", "einstein_lambda", "holonomy_dim",
             "flow_closed_forms", "conformally_parallel", "su3_valid", "su3_predicates",
             "d_omega_is_psi_plus", "coclosed_omega", "psi_plus_primitive", "d_phi", "d_star_phi"}


def catalog_dir(path: str | os.PathLike | None = None) -> Path:
    if path is not None:
        return Path(path)
    env = os.environ.get(ENV_VAR)
    return Path(env) if env else Path(__file__).parent


# -- parsing helpers ----------------------------------------------------------------

def _subs(params: Mapping[str, object]) -> dict:
    return {sympy.Symbol(k, real=True): exact_param(v) for k, v in params.items()}


def _bind(value, params: Mapping[str, object]):
    """A JSON scalar (number or expression string) evaluated with the parameters."""
    if isinstance(value, bool):
        raise SchemaError("booleans are not coefficients")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        return Fraction(value) if value.is_integer() else value
    if isinstance(value, str):
        return to_number(sympy.sympify(parse_coefficient(value)).subs(_subs(params)))
    raise SchemaError(f"coefficient {value!r} is neither a number nor an expression")


def _index(raw, dim: int, degree: int, where: str) -> tuple[int, ...]:
    if not isinstance(raw, list) or len(raw) != degree or not all(isinstance(i, int) for i in raw):
        raise SchemaError(f"{where}: index {raw!r} must be a list of {degree} integers")
    idx = tuple(i - 1 for i in raw)
    if any(not 0 <= i < dim for i in idx):
        raise SchemaError(f"{where}: index {raw} out of range 1..{dim}")
    if len(set(idx)) != len(idx):
        raise SchemaError(f"{where}: repeated index in {raw}")
    return idx


def parse_algebra(data: Mapping, params: Mapping[str, object], name: str | None = None) -> LieAlgebra:
    try:
        dim = data["dim"]
        rows = data["d"]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"algebra needs 'dim' and 'd': {exc}") from exc
    if not isinstance(dim, int) or not 1 <= dim <= 8:
        raise SchemaError(f"bad algebra dimension {dim!r}")
    if not isinstance(rows, list) or len(rows) != dim:
        raise SchemaError(f"'d' must list {dim} differentials")
    symbolic = []
    for k, row in enumerate(rows):
        entry: dict[tuple[int, int], Any] = {}
        for term in row:
            if not isinstance(term, Mapping) or "idx" not in term or "c" not in term:
                raise SchemaError(f"de^{k + 1}: malformed term {term!r}")
            i, j = _index(term["idx"], dim, 2, f"de^{k + 1}")
            c = term["c"]
            expr = parse_coefficient(c) if isinstance(c, str) else sympy.nsimplify(c)
            if i > j:
                i, j, expr = j, i, -expr
            entry[(i, j)] = entry.get((i, j), 0) + expr
        symbolic.append({key: v for key, v in entry.items() if v != 0})
    merged = dict(data.get("params", {}))
    merged.update(params)
    return from_symbolic(symbolic, merged, name=name)


def parse_form(data: Mapping, params: Mapping[str, object]) -> Form:
    try:
        dim, degree, terms = int(data["dim"]), int(data["degree"]), data["terms"]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed form: {exc}") from exc
    out: dict[tuple[int, ...], object] = {}
    for t in terms:
        if not isinstance(t, Mapping) or "idx" not in t or "c" not in t:
            raise SchemaError(f"malformed form term {t!r}")
        idx = _index(t["idx"], dim, degree, "form")
        if list(idx) != sorted(idx):
            raise SchemaError(f"form index {t['idx']} is not increasing")
        out[idx] = _bind(t["c"], params)
    return Form(dim, degree, out)


def parse_scalar_expr(data: Mapping, params: Mapping[str, object]) -> ScalarExpr:
    """ScalarExpr JSON whose fields may be expressions in the parameters."""
    try:
        terms = data["terms"]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed closed form {data!r}") from exc
    items = []
    for t in terms:
        c = _bind(t["c"], params)
        s = _bind(t.get("s", 0), params)
        a = _bind(t.get("a", 0), params)
        r = Fraction(str(t.get("r", "0")))
        items.append((c, s, r, a))
    return ScalarExpr(items)


# -- entries ------------------------------------------------------------------------

@dataclass
class CatalogEntry:
    id: str
    provenance: str
    algebra: LieAlgebra
    params: dict
    raw: dict = field(repr=False)
    path: Path | None = None

    @property
    def description(self) -> str:
        return self.raw.get("description", "")

    @property
    def expected(self) -> dict:
        return self.raw.get("expected", {})

    @property
    def flags(self) -> list[str]:
        return list(self.raw.get("flags", []))

    @property
    def m(self) -> float:
        return float(self.params["m"])

    @property
    def b(self) -> float:
        return float(self.params["b"])

    @property
    def extension(self) -> str | None:
        return self.raw.get("extension")

    @property
    def einstein_model(self) -> str | None:
        return self.raw.get("einstein_model")

    @property
    def flow(self) -> dict | None:
        return self.raw.get("flow")

    def form(self, kind: str, name: str) -> Form | None:
        data = self.raw.get("structures", {}).get(kind, {}).get(name)
        return None if data is None else parse_form(data, self.params)

    @property
    def phi(self) -> Form | None:
        return self.form("g2", "phi")

    def g2(self):
        from ..g2 import G2Structure
        phi = self.phi
        if phi is None:
            raise SchemaError(f"entry {self.id} carries no G2-structure")
        return G2Structure(phi, self.algebra)

    def su3(self):
        from ..su3 import SU3Structure
        omega, psi = self.form("su3", "omega"), self.form("su3", "psi_plus")
        if omega is None or psi is None:
            raise SchemaError(f"entry {self.id} carries no SU(3)-structure")
        base = self.algebra
        if base.dim == 7:
            base = LieAlgebra([{k: v for k, v in row.items() if 6 not in k} for row in base.d[:6]],
                              name=base.name)
        return SU3Structure(omega, psi, base)

    def closed_forms(self) -> dict[str, ScalarExpr]:
        data = self.expected.get("flow_closed_forms", {})
        return {k: parse_scalar_expr(v, self.params) for k, v in data.items()}

    def with_params(self, **params) -> CatalogEntry:
        merged = dict(self.params)
        merged.update({k: v for k, v in params.items() if v is not None})
        return _build(self.raw, merged, self.path)

    def to_dict(self) -> dict:
        return {"id": self.id, "provenance": self.provenance, "params": _plain(self.params),
                "dim": self.algebra.dim, "algebra": repr(self.algebra)}


def _plain(params: Mapping[str, object]) -> dict:
    return {k: (float(v) if isinstance(v, Fraction) else v) for k, v in sorted(params.items())}


def _build(raw: dict, params: Mapping[str, object], path: Path | None) -> CatalogEntry:
    for key in _REQUIRED:
        if key not in raw:
            raise SchemaError(f"catalog entry lacks required field {key!r}")
    unknown = set(raw) - _KNOWN
    if unknown:
        raise SchemaError(f"unknown field(s) {sorted(unknown)} in entry {raw['id']!r}")
    bad = set(raw.get("expected", {})) - _EXPECTED
    if bad:
        raise SchemaError(f"unknown expected field(s) {sorted(bad)} in entry {raw['id']!r}")
    merged = dict(DEFAULT_PARAMS)
    merged.update(raw.get("params", {}))
    merged.update(params)
    algebra = parse_algebra(raw["algebra"], merged, name=raw["id"])
    require_jacobi(algebra)
    return CatalogEntry(raw["id"], raw["provenance"], algebra, merged, raw, path)


def _resolve(ref: str | os.PathLike, directory: Path) -> Path:
    p = Path(ref)
    if p.suffix == ".json" and p.exists():
        return p
    if p.suffix != ".json":
        p = p.with_suffix(".json")
    candidate = directory / p.name
    if candidate.exists():
        return candidate
    raise G2ForgeError(f"no catalog entry {str(ref)!r} in {directory}")


def read_json(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise G2ForgeError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: top level must be an object")
    return data


def load(ref: str | os.PathLike, params: Mapping[str, object] | None = None,
         directory: str | os.PathLike | None = None) -> CatalogEntry:
    """Load an entry by id (``"table_row4"``), file name or path."""
    path = _resolve(ref, catalog_dir(directory))
    return _build(read_json(path), {k: v for k, v in (params or {}).items() if v is not None}, path)


def manifest(directory: str | os.PathLike | None = None) -> list[dict]:
    d = catalog_dir(directory)
    path = d / MANIFEST
    if path.exists():
        data = read_json(path)
        return list(data.get("entries", []))
    out = []
    for p in sorted(d.glob("*.json")):
        raw = read_json(p)
        out.append({"id": raw.get("id", p.stem), "provenance": raw.get("provenance", "")})
    return out


def list_ids(directory: str | os.PathLike | None = None) -> list[str]:
    return [e["id"] for e in manifest(directory)]


def load_all(params: Mapping[str, object] | None = None,
             directory: str | os.PathLike | None = None) -> list[CatalogEntry]:
    return [load(i, params, directory) for i in list_ids(directory)]


def provenance_of(ref: str, directory: str | os.PathLike | None = None) -> str | None:
    for e in manifest(directory):
        if e["id"] == ref:
            return e["provenance"]
    return None


# -- validation ---------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    value: Any
    expected: Any
    tol: float | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": _jsonable(self.value),
                "expected": _jsonable(self.expected), "tol": self.tol}


@dataclass
class ValidationReport:
    entry: str
    provenance: str
    params: dict
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"entry": self.entry, "provenance": self.provenance, "params": _plain(self.params),
                "passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def _jsonable(x):
    if isinstance(x, Fraction):
        return float(x)
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Form):
        return x.to_json()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _form_check(name: str, got: Form, want: Form, tol: float = EXPR_TOL) -> Check:
    diff = (got - want).to_array()
    dev = float(np.abs(diff).max(initial=0.0))
    bad = {"e" + "".join(str(i + 1) for i in I): [float(got[I]), float(want[I])]
           for I in sorted(set(got.terms) | set(want.terms))
           if abs(float(got[I]) - float(want[I])) > tol}
    return Check(name, dev <= tol, {"max_deviation": dev, "mismatched": bad}, "match", tol)


def einstein_algebra(entry: CatalogEntry, directory=None) -> LieAlgebra:
    if entry.einstein_model and entry.einstein_model != entry.id:
        return load(entry.einstein_model, entry.params, directory).algebra
    return entry.algebra


def extension_algebra(entry: CatalogEntry, directory=None) -> LieAlgebra:
    if entry.extension:
        return load(entry.extension, entry.params, directory).algebra
    return entry.algebra


def run_flow(entry: CatalogEntry, t_end: float | None = None, step: float | None = None):
    from ..flow import FlowState, integrate
    spec = entry.flow or {}
    s = entry.su3()
    state = FlowState.from_su3(s.omega, s.psi_plus)
    return integrate(state, s.algebra, float(spec.get("t_end", 1.0) if t_end is None else t_end),
                     float(spec.get("step", 1e-3) if step is None else step), m=entry.m,
                     expected=entry.closed_forms())


def validate(entry: CatalogEntry, only: set[str] | None = None, directory=None) -> ValidationReport:
    """Recompute every expected field of an entry and compare."""
    from ..curvature import Coframe, coframe_curvature, holonomy_span, ricci
    from ..flow import compare_closed_form
    from ..g2 import PHI0, conformal_parallel_check, fg_class, torsion
    from ..su3 import class_predicates, su3_checks

    exp = entry.expected
    want = (lambda k: k in exp and (only is None or k in only))
    checks = [Check("jacobi", True, "d^2 = 0", "d^2 = 0")]

    if want("nilpotent") or want("nilpotency_step"):
        cs = lower_central_series(entry.algebra)
        if want("nilpotent"):
            checks.append(Check("nilpotent", cs.nilpotent == exp["nilpotent"], cs.nilpotent, exp["nilpotent"]))
        if want("nilpotency_step"):
            checks.append(Check("nilpotency_step", cs.step == exp["nilpotency_step"], cs.step,
                                exp["nilpotency_step"]))

    if want("fg_class") or want("d_phi") or want("d_star_phi"):
        gs = entry.g2()
        if want("fg_class"):
            label = fg_class(torsion(gs)).label
            checks.append(Check("fg_class", label == exp["fg_class"], label, exp["fg_class"]))
        if want("d_phi"):
            checks.append(_form_check("d_phi", gs.d_phi, parse_form(exp["d_phi"], entry.params)))
        if want("d_star_phi"):
            checks.append(_form_check("d_star_phi", gs.d_star_phi, parse_form(exp["d_star_phi"], entry.params)))

    if want("conformally_parallel"):
        rep = conformal_parallel_check(entry.g2(), Fraction(entry.params["m"]))
        checks.append(Check("conformally_parallel", rep.passed == exp["conformally_parallel"], rep.passed,
                            exp["conformally_parallel"]))

    if want("einstein_lambda"):
        rep = ricci(einstein_algebra(entry, directory))
        target = float(_bind(exp["einstein_lambda"], entry.params))
        lam = rep.einstein_constant
        ok = lam is not None and abs(lam - target) <= EINSTEIN_TOL * max(1.0, abs(target))
        checks.append(Check("einstein_lambda", ok, lam, target, EINSTEIN_TOL))

    if want("holonomy_dim"):
        alg = extension_algebra(entry, directory)
        cc = coframe_curvature(Coframe.conformal(alg, entry.params["m"]))
        hol = holonomy_span(cc.riemann, PHI0, expected=exp["holonomy_dim"])
        checks.append(Check("holonomy_dim", hol.dim == exp["holonomy_dim"] and hol.in_g2,
                            {"dim": hol.dim, "in_g2": hol.in_g2}, exp["holonomy_dim"]))

    if any(want(k) for k in ("su3_valid", "su3_predicates", "d_omega_is_psi_plus", "coclosed_omega",
                             "psi_plus_primitive")):
        s = entry.su3()
        if want("su3_valid"):
            rep = su3_checks(s)
            checks.append(Check("su3_valid", rep.passed == exp["su3_valid"], rep.to_dict(), exp["su3_valid"]))
        if want("su3_predicates"):
            preds = class_predicates(s)
            sub = {k: preds[k] for k in exp["su3_predicates"]}
            checks.append(Check("su3_predicates", sub == exp["su3_predicates"], sub, exp["su3_predicates"]))
        if want("d_omega_is_psi_plus"):
            dev = (s.d(s.omega) - s.psi_plus).norm()
            checks.append(Check("d_omega_is_psi_plus", (dev <= EXPR_TOL) == exp["d_omega_is_psi_plus"], dev,
                                exp["d_omega_is_psi_plus"], EXPR_TOL))
        if want("coclosed_omega"):
            star_w = hodge(s.omega, FrameMetric(s.h))
            dev = s.d(star_w).norm()
            checks.append(Check("coclosed_omega", (dev <= EXPR_TOL) == exp["coclosed_omega"], dev,
                                exp["coclosed_omega"], EXPR_TOL))
        if want("psi_plus_primitive"):
            i, j = (k - 1 for k in exp["psi_plus_primitive"])
            prim = wedge(Form(6, 1, {(i,): 1}), Form(6, 1, {(j,): 1}))
            dev = (s.d(prim) - s.psi_plus).norm()
            checks.append(Check("psi_plus_primitive", dev <= EXPR_TOL, dev, exp["psi_plus_primitive"], EXPR_TOL))

    if want("flow_closed_forms"):
        sol = run_flow(entry)
        devs = compare_closed_form(sol)
        ok = sol.completed and all(v <= FLOW_TOL for v in devs.values())
        checks.append(Check("flow_closed_forms", ok, {"status": sol.status, "deviation": devs},
                            sorted(devs), FLOW_TOL))

    return ValidationReport(entry.id, entry.provenance, entry.params, checks)
