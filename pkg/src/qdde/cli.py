"""Batch front door: problem files in, reports and plot data out.

Problem file schema (JSON):

    {"q": {"modulus": num, "b": int?, "angle": num?},
     "S": int, "r1": int, "r2": int,
     "terms": [{"k": int, "m0": int, "m1": int,
                "b": [{"s": int, "re": num, "im": num}]}],
     "initial": [{"j": int, "side": "t"|"borel",
                  "coeffs": [{"re": num, "im": num}]}],
     "domain": {"lambda": {"re": num, "im": num}, "delta": num,
                "r0": num|"auto", "V": [{"re": num, "im": num}, ...],
                "epsilon_sector": num},
     "truncation": {"M": int, "H": int, "l_min": int, "l_max": int,
                    "tail_tol": num},
     "fit": {"N": int, "t_rays": int, "t_points": int}}

Exit codes: 0 success, 2 hypothesis-check failure (report still written),
1 internal error.  CSV output: comma delimiter, '.' decimal point, header
row, LF endings, 17 significant digits; identical inputs give
byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import _kernels, asymptotics, majorant
from .errors import DataError, QddeError
from .qlaplace import DomainSpec, QParameter, estimate_theta_floor
from .series import Polynomial, UnivariateSeries
from .solver import (FitConfig, OperatorTerm, ProblemSpec, Truncation,
                     evaluate_solution, initial_spiral_rows, residual_formal,
                     resolve_r0, solve_formal, validate, wh_spiral, wh_taylor)

COMMANDS = ("check", "solve-formal", "borel", "spiral", "evaluate",
            "asymptotics", "majorant", "all")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _zkey(z: complex) -> str:
    z = complex(z)
    if z.imag == 0:
        return f"z={z.real:g}"
    return f"z={z.real:g}{z.imag:+g}j"


def _complex_from(obj, where: str) -> complex:
    try:
        return complex(float(obj["re"]), float(obj["im"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{where}: expected an object with re/im") from exc


def _apply_overrides(doc: dict, overrides: list[str]) -> dict:
    for item in overrides:
        if "=" not in item:
            raise DataError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = value
    return doc


def load_problem(path: str | Path, overrides: list[str] | None = None
                 ) -> tuple[ProblemSpec, dict]:
    """Parse and validate a problem file; returns the spec and the resolved doc."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read problem file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"problem file is not valid JSON "
                        f"(line {exc.lineno}, column {exc.colno})") from exc
    doc = _apply_overrides(doc, overrides or [])

    try:
        S = int(doc["S"])
        r1 = int(doc["r1"])
        r2 = int(doc["r2"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError("fields S, r1, r2 must be integers") from exc
    if r2 < 1:
        raise DataError("field r2: must satisfy r2 >= 1")
    if r1 < 0:
        raise DataError("field r1: must satisfy r1 >= 0")

    qdoc = doc.get("q", {})
    try:
        q = QParameter(modulus=float(qdoc["modulus"]),
                       b=int(qdoc["b"]) if "b" in qdoc and qdoc["b"] is not None else None,
                       angle=float(qdoc["angle"]) if "angle" in qdoc and qdoc["angle"] is not None else None,
                       r2=r2)
    except KeyError as exc:
        raise DataError("field q: needs modulus and one of b/angle") from exc

    terms = []
    for i, tdoc in enumerate(doc.get("terms", [])):
        try:
            poly = Polynomial([(int(e["s"]), _complex_from(e, f"terms[{i}].b"))
                               for e in tdoc["b"]])
            terms.append(OperatorTerm(k=int(tdoc["k"]), m0=int(tdoc["m0"]),
                                      m1=int(tdoc["m1"]), b=poly))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"field terms[{i}]: {exc}") from exc

    entries = doc.get("initial", [])
    if len(entries) != S:
        raise DataError(f"field initial: need exactly S={S} entries")
    sides = {e.get("side", "t") for e in entries}
    if len(sides) != 1:
        raise DataError("field initial: all entries must use the same side")
    side = sides.pop()
    by_j: dict[int, UnivariateSeries] = {}
    for e in entries:
        j = int(e["j"])
        if j in by_j or not 0 <= j < S:
            raise DataError(f"field initial: bad or duplicate index j={j}")
        coeffs = [_complex_from(c, f"initial[{j}].coeffs") for c in e["coeffs"]]
        by_j[j] = UnivariateSeries(coeffs or [0.0])
    initial = tuple(by_j[j] for j in range(S))

    ddoc = doc.get("domain", {})
    try:
        r0_raw = ddoc.get("r0", "auto")
        r0 = None if r0_raw == "auto" else float(r0_raw)
        dom = DomainSpec(
            lam=_complex_from(ddoc["lambda"], "domain.lambda"),
            delta=float(ddoc["delta"]),
            r0=r0,
            v_sample=tuple(_complex_from(v, "domain.V") for v in ddoc["V"]),
            epsilon_sector=float(ddoc.get("epsilon_sector", 0.1)))
    except KeyError as exc:
        raise DataError(f"field domain: missing {exc}") from exc

    trdoc = doc.get("truncation", {})
    try:
        trunc = Truncation(M=int(trdoc["M"]), H=int(trdoc["H"]),
                           l_min=int(trdoc["l_min"]), l_max=int(trdoc["l_max"]),
                           tail_tol=float(trdoc.get("tail_tol", 1e-12)))
    except KeyError as exc:
        raise DataError(f"field truncation: missing {exc}") from exc

    fdoc = doc.get("fit", {})
    fit = FitConfig(N=int(fdoc.get("N", 12)), t_rays=int(fdoc.get("t_rays", 3)),
                    t_points=int(fdoc.get("t_points", 5)))

    spec = ProblemSpec(q=q, S=S, r1=r1, r2=r2, terms=tuple(terms),
                       initial=initial, initial_side=side, domain=dom,
                       truncation=trunc, fit=fit)
    return spec, doc


def problem_hash(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# artifact writers


def _write_table(out_dir: Path, name: str, fmt: str, columns: list[str],
                 rows: list[list]) -> str:
    if fmt == "csv":
        path = out_dir / f"{name}.csv"
        lines = [",".join(columns)]
        for row in rows:
            lines.append(",".join(
                _fmt(v) if isinstance(v, float) else str(v) for v in row))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    else:
        path = out_dir / f"{name}.json"
        payload = {"columns": columns, "rows": rows}
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n",
                        encoding="utf-8", newline="\n")
    return path.name


def _jsonable(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


# ---------------------------------------------------------------------------
# pipeline


def run(command: str, problem_path: str, out_dir: str, fmt: str = "csv",
        overrides: list[str] | None = None, tol: float | None = None,
        t_point: complex | None = None, z_point: complex = 0.0) -> int:
    """Dispatch one command; returns the process exit code."""
    if command not in COMMANDS:
        raise DataError(f"unknown command {command!r}")
    p, doc = load_problem(problem_path, overrides)
    if tol is not None:
        p, doc = load_problem(problem_path,
                              (overrides or []) + [f"truncation.tail_tol={tol}"])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    threads = os.environ.get("QDDE_THREADS")
    if threads and _kernels.NUMBA_ENABLED:
        import numba

        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))

    report: dict = {
        "command": command,
        "problem_hash": problem_hash(doc),
        "truncation": asdict(p.truncation),
        "fit": asdict(p.fit),
        "backend": _kernels.BACKEND,
        "artifacts": [],
        "checks": {},
        "notes": [],
    }

    rep = validate(p)
    ok = rep.A_ok and rep.A2_ok and rep.B_ok and rep.geometry_ok
    report["assumptions"] = _jsonable({
        "A_ok": rep.A_ok, "A2_ok": rep.A2_ok, "B_ok": rep.B_ok,
        "geometry_ok": rep.geometry_ok,
        "geometry_certified": rep.geometry_certified,
        "spectral_gap": rep.spectral_gap,
        "witnesses": [asdict(w) for w in rep.witnesses],
        "T_set": rep.T_set, "T1": rep.T1, "T1_set": rep.T1_set,
        "T0": rep.T0, "K0": rep.K0, "r_factor": rep.r_factor,
        "disc_radii": rep.disc_radii, "notes": rep.notes,
    })
    report["checks"]["assumptions"] = ok

    if not ok or command == "check":
        _finish(out, report)
        return 0 if ok else 2

    F = None
    if command in ("solve-formal", "borel", "spiral", "evaluate",
                   "asymptotics", "majorant", "all"):
        F = solve_formal(p)
        report["checks"]["formal_residual"] = residual_formal(p, F)
        if command in ("solve-formal", "all"):
            rows = [[m, h, F.coeffs[m, h].real, F.coeffs[m, h].imag]
                    for m in range(F.coeffs.shape[0])
                    for h in range(F.coeffs.shape[1])]
            report["artifacts"].append(_write_table(out, "formal", fmt,
                                                    ["m", "h", "re_f", "im_f"], rows))
    if command == "solve-formal":
        _finish(out, report)
        return 0

    tc = wh_taylor(p)
    report["checks"]["borel_route_gap"] = tc.discrepancy
    if command in ("borel", "all"):
        rows = [[n, h, tc.series.coeffs[n, h].real, tc.series.coeffs[n, h].imag]
                for n in range(tc.series.coeffs.shape[0])
                for h in range(tc.series.coeffs.shape[1])]
        report["artifacts"].append(_write_table(out, "borel", fmt,
                                                ["n", "h", "re_w", "im_w"], rows))
    if command == "borel":
        _finish(out, report)
        return 0

    W = wh_spiral(p, rep)
    report["notes"].extend(W.notes)
    growth = asymptotics.growth_certificate(W, p.q, rep.K0)
    report["fits"] = {"growth": asdict(growth)}
    c_growth, induced_r0 = asymptotics.transform_growth_scale(
        W, p.q, p.domain.lambda_index())
    report["fits"]["transform_growth_C"] = c_growth
    report["fits"]["induced_r0"] = induced_r0
    if p.domain.r0 is None:
        p = resolve_r0(p, growth.T)
        report["notes"].append(f"r0 resolved to {p.domain.r0:.6g} from fitted T")
    elif p.domain.r0 > induced_r0:
        report["notes"].append(
            f"user r0 {p.domain.r0:.6g} exceeds the fitted transform radius "
            f"{induced_r0:.6g}")
    report["domain_r0"] = p.domain.r0

    if command in ("spiral", "all"):
        rows = [[ix, W.l_min + il, h,
                 W.values[ix, il, h].real, W.values[ix, il, h].imag]
                for ix in range(len(W.base_points))
                for il in range(W.values.shape[1])
                for h in range(W.values.shape[2])]
        report["artifacts"].append(_write_table(
            out, "spiral", fmt, ["x_index", "l", "h", "re_w", "im_w"], rows))
    if command == "spiral":
        _finish(out, report)
        return 0

    if command in ("majorant", "all"):
        _majorant_stage(p, rep, W, report)
    if command == "majorant":
        _finish(out, report)
        return 0

    if command in ("evaluate", "all") and t_point is not None:
        val = evaluate_solution(p, W, t_point, z_point, germs=tc.series)
        report["evaluate"] = _jsonable({
            "t": t_point, "z": z_point, "value": val.value, "h_tail": val.h_tail})
        print(json.dumps(report["evaluate"], sort_keys=True))
    if command == "evaluate":
        if t_point is None:
            raise DataError("evaluate needs --t RE,IM")
        _finish(out, report)
        return 0

    if command in ("asymptotics", "all"):
        samples = asymptotics.default_t_samples(p, p.fit.N)
        report["fits"]["K1"] = estimate_theta_floor(
            p.domain, p.q, samples[: p.fit.t_points])
        deriv = asymptotics.derivative_certificate(
            tc.series, p, n_max=min(20, p.truncation.M),
            h_max=min(12, p.truncation.H))
        report["fits"]["derivative"] = asdict(deriv)
        gevrey = {}
        z_values = [0.0, 1.0]
        if complex(z_point) not in (0.0, 1.0):
            z_values.append(complex(z_point))
        csv_z = complex(z_point)
        for z in z_values:
            prof = asymptotics.remainder_profile(
                p, W, F, z, p.fit.N, t_samples=samples, germs=tc.series)
            fit = asymptotics.gevrey_fit(prof)
            bound_ok = bool(np.all(
                prof.normalized <= fit.C_tilde
                * fit.D_tilde ** np.array(prof.n_range)))
            gevrey[_zkey(z)] = {
                "C_tilde": fit.C_tilde, "D_tilde": fit.D_tilde,
                "slope_residual": fit.slope_residual,
                "bound_holds": bound_ok, "degenerate": fit.degenerate,
                "n_max": fit.n_max_checked, "n_star": prof.n_star,
            }
            if complex(z) == csv_z:
                rows = [[int(n), j, float(prof.R[i, j]), float(prof.ratios[i, j])]
                        for i, n in enumerate(prof.n_range)
                        for j in range(len(prof.t_samples))]
                report["artifacts"].append(_write_table(
                    out, "remainder", fmt, ["n", "t_index", "R", "rho"], rows))
                report["t_samples"] = _jsonable(list(prof.t_samples))
        report["fits"]["gevrey"] = gevrey
        try:
            per_h = asymptotics.per_h_constants(
                p, W, F, p.fit.N, t_samples=samples, germs=tc.series,
                T1=deriv.T1)
            report["fits"]["per_h"] = _jsonable({
                "exponent": per_h.exponent, "A1": per_h.A1,
                "A2": per_h.A2, "A3": per_h.A3,
                "rows": [asdict(f) for f in per_h.fits]})
        except DataError as exc:
            report["notes"].append(f"per-h fits skipped: {exc}")

    _finish(out, report)
    return 0


def _majorant_stage(p: ProblemSpec, rep, W, report: dict) -> None:
    tr = p.truncation
    w_grid = W.sup_over_base()
    init = np.max(np.abs(initial_spiral_rows(p)), axis=0)
    V = majorant.solve_growth_majorant(p, rep, init)
    dominated = bool(np.all(w_grid <= V.values))
    gap_count = int(np.count_nonzero(w_grid > V.values))
    report["checks"]["domination"] = dominated
    report["checks"]["domination_violations"] = gap_count

    T = rep.T1 if rep.T1 is not None else 1.0
    window = (tr.l_min, tr.l_max, tr.H)
    op = majorant.growth_operator(p, rep)
    params = majorant.find_contraction_scale(
        op, majorant.NormParams(T=T, X=1.0, q_mod=p.q.modulus), window)
    ratio = majorant.contraction_ratio(op, params, window, samples=100, seed=0)
    I = majorant.interface_grid(init, tr.l_min, tr.H, majorant.LAURENT)
    lead_i, other_i = majorant.apply_direct(op, I, p.q.modulus)
    rhs = majorant.WeightedGrid(np.maximum(other_i - lead_i, 0.0),
                                tr.l_min, majorant.LAURENT)
    U = majorant.neumann_fixed_point(op, rhs, p.q.modulus)
    resid = majorant.fixed_point_residual(op, U, I, params)
    report["fits"] = report.get("fits", {})
    report["fits"]["contraction"] = {
        "T": params.T, "X": params.X,
        "gain_bound": majorant.operator_gain_bound(op, params, window),
        "sampled_ratio": ratio, "fixed_point_residual": resid,
    }
    report["checks"]["contraction"] = bool(ratio <= 0.5 + 1e-9)
    report["checks"]["fixed_point_residual_ok"] = bool(resid <= 1e-10)


def _finish(out: Path, report: dict) -> None:
    path = out / "report.json"
    path.write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# entry point


def _parse_complex(text: str) -> complex:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected RE,IM")
    return complex(float(parts[0]), float(parts[1]))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdde",
        description="solve and certify a linear q-difference-differential "
                    "Cauchy problem")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--problem", required=True, help="problem file (JSON)")
    parser.add_argument("--out", default="qdde-out", help="output directory")
    parser.add_argument("--format", choices=("json", "csv"), default="csv")
    parser.add_argument("--set", action="append", default=[], dest="overrides",
                        metavar="KEY=VALUE", help="override a problem field")
    parser.add_argument("--tol", type=float, default=None,
                        help="override truncation.tail_tol")
    parser.add_argument("--t", type=_parse_complex, default=None,
                        metavar="RE,IM", help="evaluation point in t")
    parser.add_argument("--z", type=_parse_complex, default=complex(1.0, 0.0),
                        metavar="RE,IM", help="evaluation point in z")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args.command, args.problem, args.out, fmt=args.format,
                   overrides=args.overrides, tol=args.tol,
                   t_point=args.t, z_point=args.z)
    except QddeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
