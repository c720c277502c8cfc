"""Command-line front end: ``g2forge <verb> [options]``.

Exit status is 0 when every check passes, 1 when a check fails and 2 on
usage or input errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import catalog
from .catalog import CatalogEntry, parse_algebra, parse_form, read_json
from .curvature import DEFAULT_SAMPLES, EPS_EINSTEIN, RANK_TOL, Coframe, coframe_curvature, holonomy_span, ricci
from .errors import G2ForgeError, JacobiFailed
from .flow import FlowState, compare_closed_form, integrate, levels_diagnostic
from .g2 import EPS_CLASS, PHI0, TAU1_TOL, G2Structure, conformal_parallel_check, fg_class, torsion
from .lie import LieAlgebra, eigenvalue_type, jacobi_check, require_jacobi
from .su3 import SU3Structure

CLOSED_TOL = 1e-9
RATIO_DRIFT_TOL = 1e-6


# -- inputs -------------------------------------------------------------------------

class Inputs:
    """What a verb operates on: a catalog entry or user files."""

    def __init__(self, args):
        self.args = args
        self.entry: CatalogEntry | None = None
        self.sources: list[str] = []
        params = {k: getattr(args, k, None) for k in ("m", "b")}
        self.params = {k: Fraction(repr(v)) if isinstance(v, float) else v
                       for k, v in params.items() if v is not None}
        if getattr(args, "entry", None):
            self.entry = catalog.load(args.entry, self.params)
            self.params = self.entry.params
            self.sources.append(f"{self.entry.id}: {self.entry.provenance}")
        elif getattr(args, "algebra", None):
            self.sources.append(f"{args.algebra}: user file, not in the catalog")
        else:
            raise G2ForgeError("give --entry ID or --algebra FILE")

    @property
    def provenance(self) -> list[str]:
        return list(self.sources)

    @property
    def m(self) -> Fraction | float:
        m = self.params.get("m", catalog.DEFAULT_PARAMS["m"])
        return Fraction(m) if isinstance(m, (int, Fraction)) else m

    def algebra(self) -> LieAlgebra:
        if self.entry is not None:
            return self.entry.algebra
        path = Path(self.args.algebra)
        try:
            text = path.read_text().strip()
        except OSError as exc:
            raise G2ForgeError(f"cannot read {path}: {exc}") from exc
        params = dict(catalog.DEFAULT_PARAMS)
        params.update(self.params)
        if text.startswith("("):
            algebra = LieAlgebra.parse(text, params, name=path.stem)
        else:
            data = read_json(path)
            # a whole catalog-style entry is accepted as well as a bare algebra
            algebra = parse_algebra(data.get("algebra", data), params, name=path.stem)
        require_jacobi(algebra)
        return algebra

    def _form_file(self, flag: str):
        path = getattr(self.args, flag, None)
        if not path:
            return None
        self.sources.append(f"{path}: user file, not in the catalog")
        params = dict(catalog.DEFAULT_PARAMS)
        params.update(self.params)
        return parse_form(read_json(Path(path)), params)

    def g2(self) -> G2Structure:
        phi = self._form_file("phi")
        if phi is None and self.entry is not None and self.entry.phi is not None:
            return self.entry.g2()
        algebra = self.algebra()
        if phi is None:
            if algebra.dim != 7:
                raise G2ForgeError("a G2-structure needs a 7-dimensional algebra")
            phi = PHI0
            self.sources.append("phi: standard 3-form")
        return G2Structure(phi, algebra)

    def su3(self) -> SU3Structure:
        omega, psi = self._form_file("omega"), self._form_file("psi")
        if omega is None and psi is None and self.entry is not None:
            return self.entry.su3()
        if omega is None or psi is None:
            raise G2ForgeError("the flow needs both --omega and --psi")
        return SU3Structure(omega, psi, self.algebra())


# -- verbs ------------------------------------------------------------------------------

def _expect(report: dict, name: str, value, entry: CatalogEntry | None) -> bool:
    """Record the catalog expectation for a field; True when absent or matched."""
    if entry is None or name not in entry.expected:
        return True
    want = entry.expected[name]
    ok = value == want
    report.setdefault("expected", {})[name] = want
    return ok


def cmd_check(args, inp: Inputs) -> tuple[dict, bool]:
    if inp.entry is None:
        try:
            algebra = inp.algebra()
        except JacobiFailed as exc:
            return {"jacobi": False, "witness": exc.witness + 1, "message": str(exc)}, False
        rep = jacobi_check(algebra)
        return {"jacobi": rep.passed, "exact": rep.exact, "dim": algebra.dim}, rep.passed
    rep = catalog.validate(inp.entry)
    out = rep.to_dict()
    out["tolerances"] = {"flow": catalog.FLOW_TOL, "forms": catalog.EXPR_TOL, "einstein": catalog.EINSTEIN_TOL}
    return out, rep.passed


def _check_entry(ref: str, params: dict) -> dict:
    return catalog.validate(catalog.load(ref, params)).to_dict()


def cmd_check_all(args) -> tuple[dict, bool, list[str]]:
    ids = catalog.list_ids()
    params = {k: getattr(args, k) for k in ("m", "b") if getattr(args, k, None) is not None}
    if args.jobs and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_check_entry, ids, [params] * len(ids)))
    else:
        results = [_check_entry(i, params) for i in ids]
    prov = [f"{r['entry']}: {r['provenance']}" for r in results]
    report = {"entries": results, "passed": all(r["passed"] for r in results),
              "tolerances": {"flow": catalog.FLOW_TOL, "forms": catalog.EXPR_TOL,
                             "einstein": catalog.EINSTEIN_TOL}}
    return report, report["passed"], prov


def cmd_torsion(args, inp: Inputs) -> tuple[dict, bool]:
    gs = inp.g2()
    tc = torsion(gs)
    cls = fg_class(tc, args.eps_class).label
    report = {"class": cls, **tc.to_dict(), "d_phi": gs.d_phi.to_json(), "d_star_phi": gs.d_star_phi.to_json(),
              "tolerances": {"eps_class": args.eps_class, "tau1": TAU1_TOL}}
    return report, _expect(report, "fg_class", cls, inp.entry)


def cmd_classify(args, inp: Inputs) -> tuple[dict, bool]:
    gs = inp.g2()
    tc = torsion(gs)
    cls = fg_class(tc, args.eps_class).label
    report: dict[str, Any] = {"class": cls, "tau0": tc.tau0, "tau1": tc.tau1.to_json(),
                              "tolerances": {"eps_class": args.eps_class, "tau1": TAU1_TOL}}
    ok = _expect(report, "fg_class", cls, inp.entry)
    D = extension_derivation(gs.algebra)
    if D is not None:
        et = eigenvalue_type(D)
        report["derivation"] = {"D": [[float(v) for v in row] for row in D],
                                "eigenvalues": [float(v) for v in et.eigenvalues],
                                "multiplicities": et.multiplicities, "scaled": et.scaled(),
                                "diagonalizable": et.diagonalizable}
    if not gs.algebra.d[6]:
        conf = conformal_parallel_check(gs, inp.m)
        report["conformally_parallel"] = conf.passed
        report["m"] = float(inp.m)
        ok = _expect(report, "conformally_parallel", conf.passed, inp.entry) and ok
    return report, ok


def extension_derivation(algebra: LieAlgebra) -> list | None:
    """D with de^i = ... + sum_j D_ij e^{j7}, when e^7 is closed and D is nonzero."""
    n = algebra.dim - 1
    if algebra.d[n]:
        return None
    D = [[algebra.d[i].get((j, n), 0) for j in range(n)] for i in range(n)]
    return D if any(v != 0 for row in D for v in row) else None


def cmd_conformal(args, inp: Inputs) -> tuple[dict, bool]:
    rep = conformal_parallel_check(inp.g2(), inp.m)
    report = rep.to_dict()
    report["tolerances"] = {"symbolic": "exact cancellation"}
    return report, rep.passed


def cmd_ricci(args, inp: Inputs) -> tuple[dict, bool]:
    algebra = catalog.einstein_algebra(inp.entry) if inp.entry is not None else inp.algebra()
    if inp.entry is not None and inp.entry.einstein_model and inp.entry.einstein_model != inp.entry.id:
        inp.sources.append(f"{inp.entry.einstein_model}: {catalog.provenance_of(inp.entry.einstein_model)}")
    rep = ricci(algebra, eps=args.eps)
    report = rep.to_dict()
    report["eps_einstein"] = args.eps
    report["tolerances"] = {"einstein": args.eps}
    ok = rep.is_einstein
    if ok and inp.entry is not None and "einstein_lambda" in inp.entry.expected:
        target = float(catalog._bind(inp.entry.expected["einstein_lambda"], inp.entry.params))
        report["expected"] = {"einstein_lambda": target}
        ok = abs(rep.einstein_constant - target) <= catalog.EINSTEIN_TOL * max(1.0, abs(target))
    return report, ok


def cmd_holonomy(args, inp: Inputs) -> tuple[dict, bool]:
    algebra = catalog.extension_algebra(inp.entry) if inp.entry is not None else inp.algebra()
    if inp.entry is not None and inp.entry.extension:
        inp.sources.append(f"{inp.entry.extension}: {catalog.provenance_of(inp.entry.extension)}")
    if algebra.dim != 7:
        raise G2ForgeError("holonomy runs on the 7-dimensional conformal metric")
    samples = tuple(args.samples) if args.samples else DEFAULT_SAMPLES
    want = inp.entry.expected.get("holonomy_dim") if inp.entry is not None else None
    cc = coframe_curvature(Coframe.conformal(algebra, inp.m), samples)
    hol = holonomy_span(cc.riemann, PHI0, expected=want)
    report = hol.to_dict()
    report.update({"samples": list(samples), "max_ricci": cc.max_ricci, "m": float(inp.m),
                   "tolerances": {"rank": RANK_TOL, "einstein": EPS_EINSTEIN}})
    ok = _expect(report, "holonomy_dim", hol.dim, inp.entry)
    return report, ok


def cmd_flow(args, inp: Inputs) -> tuple[dict, bool]:
    s = inp.su3()
    spec = (inp.entry.flow or {}) if inp.entry is not None else {}
    t_end = args.t_end if args.t_end is not None else float(spec.get("t_end", 1.0))
    step = args.step if args.step is not None else float(spec.get("step", 1e-3))
    expected = inp.entry.closed_forms() if inp.entry is not None else {}
    m = float(inp.m) if expected else None
    sol = integrate(FlowState.from_su3(s.omega, s.psi_plus), s.algebra, t_end, step, m=m, expected=expected)
    devs = compare_closed_form(sol)
    ratio = sol.monitors["ratio"]
    mon = {
        "closed_rho": float(sol.monitors["closed_rho"].max(initial=0.0)),
        "closed_sigma": float(sol.monitors["closed_sigma"].max(initial=0.0)),
        "ratio_drift": float(np.abs(ratio - ratio[0]).max(initial=0.0)) if len(ratio) else 0.0,
    }
    ok = (sol.completed and all(v <= catalog.FLOW_TOL for v in devs.values())
          and mon["closed_rho"] <= CLOSED_TOL and mon["closed_sigma"] <= CLOSED_TOL
          and mon["ratio_drift"] <= RATIO_DRIFT_TOL)
    tracked = list(expected) or ["rho:125", "omega:14"]
    final = {k: float(sol.coefficient(k)[-1]) for k in tracked} if len(sol.times) else {}
    report = {"status": sol.status, "reason": sol.reason, "t_start": 0.0,
              "t_reached": float(sol.times[-1]) if len(sol.times) else 0.0, "t_end": t_end, "step": step,
              "steps": max(len(sol.times) - 1, 0), "closed_form_deviation": devs, "monitors": mon,
              "final": final,
              "tolerances": {"closed_form": catalog.FLOW_TOL, "closedness": CLOSED_TOL,
                             "ratio_drift": RATIO_DRIFT_TOL}}
    if spec.get("levels_diagnostic") and len(sol.times):
        report["diagnostics"] = {"levels": levels_diagnostic(sol, float(inp.m))}
    if args.out or args.format == "csv":
        header, rows = sol.to_rows(tracked)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) for v in row])
        report["_csv"] = buf.getvalue()
    return report, ok


def cmd_catalog(args) -> tuple[dict, bool, list[str]]:
    if args.action == "list":
        rows = catalog.manifest()
        return {"entries": rows, "count": len(rows)}, True, [f"{r['id']}: {r['provenance']}" for r in rows]
    if args.action == "show":
        if not args.ids:
            raise G2ForgeError("catalog show needs an id")
        out, prov = [], []
        for ref in args.ids:
            e = catalog.load(ref)
            out.append({**e.to_dict(), "description": e.description, "flags": e.flags,
                        "expected": e.expected})
            prov.append(f"{e.id}: {e.provenance}")
        return {"entries": out}, True, prov
    ids = args.ids or catalog.list_ids()
    params: dict = {}
    if args.jobs and args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_check_entry, ids, [params] * len(ids)))
    else:
        results = [_check_entry(i, params) for i in ids]
    summary = [{"id": r["entry"], "passed": r["passed"],
                "failed": [c["name"] for c in r["checks"] if not c["passed"]]} for r in results]
    ok = all(r["passed"] for r in results)
    return {"entries": summary, "passed": ok}, ok, [f"{r['entry']}: {r['provenance']}" for r in results]


HANDLERS = {"check": cmd_check, "classify": cmd_classify, "torsion": cmd_torsion, "ricci": cmd_ricci,
            "holonomy": cmd_holonomy, "flow": cmd_flow, "conformal": cmd_conformal}


# -- output -----------------------------------------------------------------------------

def _clean(x):
    if isinstance(x, float):
        return 0.0 if x == 0 else x
    if isinstance(x, Fraction):
        return float(x)
    if isinstance(x, np.generic):
        return _clean(x.item())
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def _flatten(x, prefix: str = "") -> list[tuple[str, Any]]:
    if isinstance(x, dict):
        out = []
        for k in sorted(x):
            out += _flatten(x[k], f"{prefix}.{k}" if prefix else str(k))
        return out
    if isinstance(x, list) and x and all(isinstance(v, dict) for v in x):
        out = []
        for i, v in enumerate(x):
            out += _flatten(v, f"{prefix}[{i}]")
        return out
    return [(prefix, x)]


def render(report: dict, fmt: str) -> str:
    report = _clean(report)
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    rows = _flatten(report)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        for k, v in rows:
            w.writerow([k, json.dumps(v, sort_keys=True) if isinstance(v, (list, dict)) else v])
        return buf.getvalue()
    lines = [f"provenance: {p}" for p in report.get("provenance", [])]
    lines.append(f"passed: {str(report.get('passed', False)).lower()}")
    for k, v in rows:
        if k == "passed" or k.startswith("provenance"):
            continue
        if isinstance(v, float):
            v = f"{v:.12g}"
        elif isinstance(v, (list, dict)):
            v = json.dumps(v, sort_keys=True)
        lines.append(f"{k}: {v}")
    return "\n".join(lines) + "\n"


# -- parser -------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="g2forge", description="Checks for G2- and SU(3)-structures on Lie algebras.")
    sub = p.add_subparsers(dest="verb", required=True, metavar="VERB")

    def common(sp, inputs=True):
        if inputs:
            sp.add_argument("--entry", help="catalog id, e.g. table_row4")
            sp.add_argument("--algebra", help="algebra file: JSON or tuple notation")
            sp.add_argument("--m", type=float, help="bind the parameter m (default -1)")
            sp.add_argument("--b", type=float, help="bind the parameter b (default 1)")
        sp.add_argument("--format", choices=("text", "json", "csv"), default="text")
        sp.add_argument("--out", help="write the report (or the flow trajectory CSV) to this path")

    sp = sub.add_parser("check", help="Jacobi identity and every expected catalog field")
    common(sp)
    sp.add_argument("--all", action="store_true", help="validate every catalog entry")
    sp.add_argument("--jobs", type=int, default=1, help="parallel workers across entries")

    for verb, text in (("classify", "torsion class and conformal parallelism"),
                       ("torsion", "intrinsic torsion components"),
                       ("conformal", "closedness of the conformally rescaled phi and *phi")):
        sp = sub.add_parser(verb, help=text)
        common(sp)
        sp.add_argument("--phi", help="3-form JSON file (default: the standard phi)")
        sp.add_argument("--eps-class", type=float, default=EPS_CLASS, dest="eps_class")

    sp = sub.add_parser("ricci", help="Ricci tensor of the left-invariant metric")
    common(sp)
    sp.add_argument("--eps", type=float, default=EPS_EINSTEIN)

    sp = sub.add_parser("holonomy", help="holonomy algebra of the conformal metric")
    common(sp)
    sp.add_argument("--samples", type=float, nargs="+", help="time samples (default 0 0.25 0.5 1)")

    sp = sub.add_parser("flow", help="integrate the half-flat evolution")
    common(sp)
    sp.add_argument("--omega", help="2-form JSON file")
    sp.add_argument("--psi", help="3-form JSON file")
    sp.add_argument("--t-end", type=float, dest="t_end")
    sp.add_argument("--step", type=float)

    sp = sub.add_parser("catalog", help="list, show or validate catalog entries")
    sp.add_argument("action", nargs="?", choices=("list", "show", "validate"), default="list")
    sp.add_argument("ids", nargs="*")
    sp.add_argument("--jobs", type=int, default=1)
    common(sp, inputs=False)
    return p


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.verb == "catalog":
            report, ok, prov = cmd_catalog(args)
        elif args.verb == "check" and args.all:
            report, ok, prov = cmd_check_all(args)
        else:
            prov = []
            try:
                inp = Inputs(args)
                prov = inp.provenance
                report, ok = HANDLERS[args.verb](args, inp)
                prov = inp.provenance
            except JacobiFailed as exc:
                report, ok = {"jacobi": False, "witness": exc.witness + 1, "message": str(exc)}, False
    except (G2ForgeError, OSError, ValueError) as exc:
        print(f"g2forge: error: {exc}", file=stderr)
        return 2

    report = dict(report)
    report["provenance"] = prov
    report["verb"] = args.verb
    report["passed"] = bool(ok)
    trajectory = report.pop("_csv", None)

    if args.verb == "flow" and trajectory is not None:
        if args.out:
            try:
                Path(args.out).write_text(trajectory)
            except OSError as exc:
                print(f"g2forge: error: {exc}", file=stderr)
                return 2
            text = render(report, "text" if args.format == "csv" else args.format)
            stdout.write(text)
        else:
            for line in prov:
                print(f"provenance: {line}", file=stderr)
            stdout.write(trajectory)
        return 0 if ok else 1

    text = render(report, args.format)
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            print(f"g2forge: error: {exc}", file=stderr)
            return 2
        for line in prov:
            stdout.write(f"provenance: {line}\n")
        stdout.write(f"passed: {str(bool(ok)).lower()}\n")
    else:
        stdout.write(text)
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
