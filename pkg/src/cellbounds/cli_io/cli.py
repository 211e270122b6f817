"""Command line: ``cellbounds bounds|sharp|interp|reproduce``.

Every command builds a report dict (``title``, ``rows``, ``summary``,
``failures``, free-text ``appendix``).  The output formats render the same
dict, so the machine format (JSON) holds every number printed as text.
Exit status is 0 iff ``failures`` is empty; otherwise the failure list is
also written to stderr as JSON.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys

import numpy as np

from .. import fields
from .. import geometry as geo
from .. import interpolation as ip
from .. import oracle
from .. import scalar_bounds as sb
from .. import vector_bounds as vb
from ..errors import CellBoundsError, ParseError
from . import reproduce as rp
from .formats import parse_cell, parse_mesh, serialize_mesh

log = logging.getLogger("cellbounds")


def _report(title, rows=(), summary=None, failures=(), appendix=""):
    return {
        "title": title,
        "rows": list(rows),
        "summary": dict(summary or {}),
        "failures": list(failures),
        "appendix": appendix,
    }


# ---------------------------------------------------------------------------
# rendering


def _num(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.10g}"
    if isinstance(x, (list, tuple)):
        return "(" + ", ".join(_num(v) for v in x) + ")"
    if isinstance(x, dict):
        return "; ".join(f"{k}={_num(v)}" for k, v in x.items())
    if x is None:
        return "-"
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _columns(rows):
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    return cols


def render(report, fmt="text") -> str:
    rows = report["rows"]
    if fmt == "machine":
        d = {k: v for k, v in report.items() if k != "appendix" or v}
        d["ok"] = not report["failures"]
        return json.dumps(_jsonable(d), indent=2, sort_keys=False)
    cols = _columns(rows)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section"] + cols)
        for r in rows:
            w.writerow(["row"] + [_num(r.get(c)) for c in cols])
        for k, v in report["summary"].items():
            w.writerow(["summary", k, _num(v)])
        for f in report["failures"]:
            w.writerow(["failure", _num(f)])
        for line in report["appendix"].splitlines():
            w.writerow(["appendix", line])
        return buf.getvalue().rstrip("\n")
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    out = [report["title"], ""]
    if rows:
        cells = [[_num(r.get(c)) for c in cols] for r in rows]
        width = [max(len(c), *(len(x[i]) for x in cells)) for i, c in enumerate(cols)]
        out.append("  ".join(c.ljust(w) for c, w in zip(cols, width)).rstrip())
        out.append("  ".join("-" * w for w in width))
        out += ["  ".join(x.ljust(w) for x, w in zip(line, width)).rstrip() for line in cells]
        out.append("")
    for k, v in report["summary"].items():
        out.append(f"{k}: {_num(v)}")
    if report["appendix"]:
        out += ["", report["appendix"]]
    if report["failures"]:
        out += ["", f"FAILED ({len(report['failures'])}):"]
        out += [f"  - {_num(f)}" for f in report["failures"]]
    return "\n".join(out).rstrip()


# ---------------------------------------------------------------------------
# argument helpers


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None


def _gamma(arg, doc_gamma, cell):
    """``None`` -> document GAMMA; ``all`` -> every face; otherwise ``0,2``."""
    if arg is None:
        return tuple(doc_gamma)
    if arg.strip().lower() == "all":
        return tuple(range(len(cell.faces)))
    try:
        g = tuple(int(t) for t in arg.replace(" ", "").split(",") if t)
    except ValueError:
        raise ParseError(f"--gamma expects face indices like 0,2 or 'all', got {arg!r}") from None
    bad = [f for f in g if f < 0 or f >= len(cell.faces)]
    if bad:
        raise ParseError(f"--gamma face {bad[0]} out of range 0..{len(cell.faces) - 1}")
    return g


def _bound_row(quantity, b: sb.ConstantBound, gamma=None):
    return {
        "quantity": quantity,
        "gamma": gamma,
        "kind": b.kind,
        "value": b.value,
        "formula": b.formula,
        "preconditions": dict(b.preconditions) or None,
        "notes": "; ".join(b.notes) or None,
    }


# ---------------------------------------------------------------------------
# commands


def cmd_bounds(args):
    doc = parse_cell(_read(args.cellfile))
    cell = doc.cell
    gamma = _gamma(args.gamma, doc.gamma, cell)
    rows, failures = [], []
    rows.append(_bound_row("C_P", sb.cp_upper_classical(cell)))
    for fn in (sb.cp_upper_convex, sb.cp_upper_isosceles, sb.cp_lower_cheng):
        try:
            rows.append(_bound_row("C_P", fn(cell)))
        except CellBoundsError as exc:
            log.debug("%s not applicable: %s", fn.__name__, exc)
    summary = {"cell": cell.kind.value, "dimension": cell.dim, "diameter": geo.diameter(cell), "measure": geo.measure(cell)}
    if gamma:
        found = sb.applicable_c_gamma(cell, gamma)
        rows += [_bound_row("C_Gamma", b, gamma) for b in found]
        summary["gamma"] = gamma
        try:
            best = sb.best_c_gamma(cell, gamma)
        except CellBoundsError as exc:
            failures.append({"command": "bounds", "gamma": gamma, "error": str(exc)})
        else:
            summary["best_c_gamma"] = best.value
            summary["best_formula"] = best.formula
            exact = [b for b in found if b.kind == "exact" and not b.disputed]
            uppers = [b for b in found if b.kind == "upper"]
            if exact and uppers:
                u = min(uppers, key=lambda b: b.value)
                summary["upper_over_exact"] = u.value / exact[0].value
        if cell.kind == geo.CellKind.PRISM and len(gamma) == 1 and gamma[0] == 0:
            try:
                ch = sb.c_gamma_prism_constant_height(cell)
            except CellBoundsError:
                pass
            else:
                rows.append(_bound_row("C_Gamma", ch, gamma))
                ex = sb.exact_tabulated(cell, gamma)
                if ex is not None:
                    summary["upper_over_exact"] = ch.value / ex.value
        if len(gamma) == cell.dim:
            try:
                v = vb.vector_constant_for_cell(cell, gamma)
            except CellBoundsError as exc:
                summary["vector_constant"] = f"not available: {exc}"
            else:
                rows.append(
                    {"quantity": "vector", "gamma": gamma, "kind": "upper", "value": v.value, "formula": v.formula, "preconditions": {"lambda_1": v.lambda_min}, "notes": None}
                )
    return _report(f"bounds for {args.cellfile}", rows, summary, failures)


def cmd_sharp(args):
    doc = parse_cell(_read(args.cellfile))
    cell = doc.cell
    gamma = _gamma(args.gamma, doc.gamma, cell)
    if args.mode != "cp" and not gamma:
        raise ParseError(f"mode {args.mode} needs --gamma or a GAMMA section")
    kw = {"levels": args.levels}
    if args.tolerance is not None:
        kw["tol"] = args.tolerance
    if args.max_unknowns is not None:
        kw["max_unknowns"] = args.max_unknowns
    res = oracle.run(cell, args.mode, gamma or None, args.level, **kw)
    rows = [
        {"level": r.level, "unknowns": r.unknowns, "eigenvalue": r.eigenvalue, "constant": r.constant, "delta": r.delta}
        for r in res.rows
    ]
    summary = {
        "mode": res.mode,
        "gamma": gamma or None,
        "constant": res.constant,
        "extrapolated": res.extrapolated,
        "eigen_residual": res.residual,
        "constraint_residual": res.constraint_residual,
    }
    return _report(f"sharp {args.mode} constant for {args.cellfile}", rows, summary)


def _field(source, dim, mode):
    if os.path.exists(source):
        data = np.loadtxt(source, ndmin=2)
        if data.shape[1] <= dim:
            raise ParseError(f"nodal file {source} needs {dim} coordinates plus values per row")
        return fields.nodal(data[:, :dim], data[:, dim:] if data.shape[1] > dim + 1 else data[:, dim])
    try:
        f = fields.parse_field(source, dim)
    except ParseError as exc:
        raise ParseError(f"unknown field {source!r}: {exc}") from None
    return f


def _plan(arg, mesh, mode):
    if arg is None or arg in ("first", "default"):
        return None
    if arg == "all":
        if mode == "vector":
            raise ParseError("plan 'all' is a scalar plan")
        return "all"
    if arg.startswith("face:"):
        try:
            k = int(arg[5:])
        except ValueError:
            raise ParseError(f"invalid plan {arg!r}") from None
        return k if mode == "scalar" else None
    groups = arg.split(",")
    try:
        plan = [tuple(int(t) for t in g.split("+")) for g in groups]
    except ValueError:
        raise ParseError(f"invalid plan {arg!r}; use first, all, face:K or per-cell faces like 0,1+2,...") from None
    if len(plan) != len(mesh.cells):
        raise ParseError(f"plan lists {len(plan)} cells, mesh has {len(mesh.cells)}")
    return plan


def cmd_interp(args):
    doc = parse_mesh(_read(args.meshfile))
    mesh = doc.mesh
    w = _field(args.field, mesh.dim, args.mode)
    if (args.mode == "vector") != w.is_vector:
        raise ParseError(f"field {args.field!r} does not match mode {args.mode}")
    plan = _plan(args.plan, mesh, args.mode)
    if args.mode == "scalar":
        pc = ip.interp_mesh_scalar(w, mesh, plan)
        residual = pc.residual
    else:
        if isinstance(plan, int):
            raise ParseError("face:K is a scalar plan")
        pc = ip.interp_mesh_vector(w, mesh, plan)
        residual = max(pc.residual, ip.mesh_flux_residual(w, mesh, pc))
    err, grad = ip.error_norms(w, pc)
    rows = []
    for ci, (val, faces) in enumerate(zip(pc.values, pc.info["plan"])):
        rows.append({"cell": ci, "faces": tuple(faces), "value": val.tolist() if np.ndim(val) else float(val), "constant": pc.bound_detail[ci].value})
    summary = {
        "field": args.field,
        "mode": args.mode,
        "error": err,
        "grad_norm": grad,
        "bound": pc.bound,
        "bound_times_grad": pc.bound * grad,
        "estimate_holds": bool(err <= pc.bound * grad + 1e-9),
        "preservation_residual": residual,
    }
    failures = []
    if not summary["estimate_holds"]:
        failures.append({"check": "error <= bound * grad", "error": err, "rhs": pc.bound * grad})
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(serialize_mesh(mesh, pc.values))
        summary["output"] = args.output
    return _report(f"{args.mode} interpolation of {args.field} on {args.meshfile}", rows, summary, failures)


def cmd_reproduce(args):
    blocks = rp.BLOCKS if not args.blocks else tuple(b.strip() for b in args.blocks.split(","))
    checks, extra = rp.run_suite(args.seed, blocks, quick=args.quick)
    rows = [
        {"block": c.block, "check": c.name, "measured": c.measured, "expected": c.expected, "status": "PASS" if c.passed else "FAIL", "note": c.note or None, "numbers": c.numbers or None}
        for c in checks
    ]
    failures = [
        {"block": c.block, "check": c.name, "measured": c.measured, "expected": c.expected, "note": c.note}
        for c in checks
        if not c.passed
    ]
    summary = {"checks": len(checks), "passed": len(checks) - len(failures), "seed": args.seed, "quick": args.quick}
    return _report("reproduction suite", rows, summary, failures, extra)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "csv", "machine"), default="text")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cellbounds", description="Poincare-type constants for mesh cells.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", parents=[common], help="closed-form bounds for a cell")
    b.add_argument("cellfile")
    b.add_argument("--gamma", help="face indices (0,2) or 'all'; default: GAMMA section")

    s = sub.add_parser("sharp", parents=[common], help="finite element estimate of a sharp constant")
    s.add_argument("cellfile")
    s.add_argument("--gamma")
    s.add_argument("--mode", choices=oracle.MODES, default="scalar")
    s.add_argument("--level", type=int, help="finest refinement level (default: largest within --max-unknowns)")
    s.add_argument("--levels", type=int, default=3, help="number of levels in the convergence table")
    s.add_argument("--max-unknowns", type=int)
    s.add_argument("--tolerance", type=float, help="eigensolver relative tolerance")

    i = sub.add_parser("interp", parents=[common], help="piecewise-constant interpolation on a mesh")
    i.add_argument("meshfile")
    i.add_argument("field", help="field name such as 'sin(pi*x1)' or '[x2; x1]', or a nodal data file")
    i.add_argument("--mode", choices=("scalar", "vector"), default="scalar")
    i.add_argument("--plan", help="first | all | face:K | per-cell faces '0,1+2,...'")
    i.add_argument("--output", help="write the interpolant as a mesh file with VALUES")

    r = sub.add_parser("reproduce", parents=[common], help="run the reproduction suite")
    r.add_argument("--blocks", help=f"comma list from {','.join(rp.BLOCKS)}")
    r.add_argument("--quick", action="store_true", help="small samples and coarse meshes (smoke test only)")
    return p


COMMANDS = {"bounds": cmd_bounds, "sharp": cmd_sharp, "interp": cmd_interp, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        report = COMMANDS[args.command](args)
    except (CellBoundsError, ValueError) as exc:
        line = getattr(exc, "line", None)
        fail = {"command": args.command, "error": type(exc).__name__, "message": str(exc)}
        if line is not None:
            fail["line"] = line
        report = _report(f"{args.command} failed", failures=[fail])
    print(render(report, args.format))
    if report["failures"]:
        print(json.dumps(_jsonable({"failures": report["failures"]})), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
