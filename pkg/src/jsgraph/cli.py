"""Command-line front end.

Exit codes: 0 pass, 2 check failed, 3 partial result, 64 usage or malformed
config, 65 contract violation, 70 internal error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    classify_convergence,
    flux,
    flux_report,
    verify_divergence_structure,
)
from .curves import (
    GeodesicConnectionError,
    IntegrationError,
    connect_geodesic,
    f_length,
    read_curve_csv,
    reaper_arc,
    segment,
    shoot_geodesic,
    write_curve_csv,
)
from .domain import DomainError, check_existence, validate_domain
from .io import (
    EXAMPLES,
    ConfigError,
    Manifest,
    fields_table,
    load_config,
    rows_to_csv,
    vtk_text,
)
from .metric import BUILTIN_MODELS, ChartError, model_by_name
from .mesh import MeshError, triangulate
from .solver import CapSchedule, ContractError, SolverError, comparison_check, solve_jenkins_serrin

EXIT_OK, EXIT_FAIL, EXIT_PARTIAL = 0, 2, 3
EXIT_USAGE, EXIT_CONTRACT, EXIT_INTERNAL = 64, 65, 70

log = logging.getLogger("jsgraph")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _point(text: str) -> np.ndarray:
    try:
        x, t = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,t got {text!r}") from None
    return np.array([x, t])


def _caps(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated caps, got {text!r}") from None


def _triple(text: str) -> tuple[float, float, float]:
    try:
        a, b, c = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}") from None
    return a, b, c


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _curve_csv(g) -> str:
    lines = ["x,t"] + [f"{x:.17g},{t:.17g}" for x, t in g.samples]
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ subcommands

def cmd_geodesic(args) -> int:
    m = model_by_name(args.metric, args.c)
    if args.action == "shoot":
        g = shoot_geodesic(m, args.start, args.angle, args.len, spacing=args.spacing)
        log.info("stopped: %s after flat length %.6g", g.info.reason, g.info.flat_length)
    else:
        g = connect_geodesic(m, args.start, args.to, spacing=args.spacing)
    _emit(_curve_csv(g), args.out)
    return EXIT_OK


def cmd_flength(args) -> int:
    m = model_by_name(args.metric, args.c)
    if args.curve is not None:
        g = read_curve_csv(args.curve)
    elif args.reaper is not None:
        s, r, a = args.reaper
        g = reaper_arc(m, s, r, a)
    elif args.segment is not None:
        g = segment(args.segment[0], args.segment[1])
    else:
        raise UsageError("flength: give --curve, --reaper or --segment")
    print(f"f_length: {f_length(m, g):.17g}")
    return EXIT_OK


def _verdict_text(v, report) -> str:
    lines = [f"valid: {str(report.valid).lower()}"]
    lines += [f"violation: {x}" for x in report.violations]
    if v is not None:
        lines.append(f"verdict: {v.status}")
        lines.append(f"passes: {str(v.passes).lower()}")
        if v.balance is not None:
            lines.append(f"balance: {v.balance:.17g}")
        if v.reason:
            lines.append(f"reason: {v.reason}")
        if v.witness is not None:
            lines.append(f"witness: {v.witness.describe()}")
        lines.append(f"polygons: {len(v.polygons)}")
        for p, r in zip(v.polygons, v.reports):
            lines.append(
                f"polygon: {p.describe()} alpha_f={r.alpha_f:.17g} beta_f={r.beta_f:.17g} "
                f"perimeter_f={r.perimeter_f:.17g} pass={str(r.passes).lower()}"
            )
    return "\n".join(lines) + "\n"


def _existence(cfg):
    m = cfg.model()
    d = cfg.build_domain()
    report = validate_domain(m, d)
    verdict = check_existence(m, d, validate=False) if report.valid else None
    return m, d, report, verdict


def cmd_check(args) -> int:
    cfg = load_config(args.config)
    _, _, report, verdict = _existence(cfg)
    sys.stdout.write(_verdict_text(verdict, report))
    if verdict is None or verdict.status == "fails":
        return EXIT_FAIL
    if verdict.status == "partial":
        return EXIT_PARTIAL
    return EXIT_OK


def _apply_overrides(cfg, args):
    if getattr(args, "caps", None) is not None:
        cfg.caps = args.caps
    if getattr(args, "h", None) is not None:
        if not args.h > 0:
            raise UsageError("--h must be positive")
        cfg.h_target = args.h
    if getattr(args, "out", None) is not None:
        cfg.output_dir = args.out
    if getattr(args, "allow_divergent", False):
        cfg.allow_divergent = True
    CapSchedule(cfg.caps)  # contract check before any work
    return cfg


def _flux_rows(reports) -> str:
    rows = [["cap", "edge", "kind", "flux", "f_length", "ratio"]]
    for fr in reports:
        for row in fr.csv_rows()[1:]:
            rows.append([f"{fr.cap:.17g}"] + row)
    return rows_to_csv(rows)


def cmd_solve(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    want = cfg.outputs
    if want["divergence"] and len(cfg.caps) < 3:
        raise ContractError(f"divergence classification needs at least 3 caps, got {len(cfg.caps)}")
    m, d, report, verdict = _existence(cfg)
    if not report.valid:
        sys.stdout.write(_verdict_text(None, report))
        return EXIT_FAIL
    if not verdict.passes and not cfg.allow_divergent:
        sys.stdout.write(_verdict_text(verdict, report))
        sys.stdout.write("refusing to solve: structural condition fails (set allow_divergent = true)\n")
        return EXIT_FAIL

    man = Manifest(cfg.output_dir, f"solve {args.config}")
    man.note(f"threads: {args.threads}")
    man.write("existence.txt", _verdict_text(verdict, report), "existence verdict")
    t0 = time.perf_counter()
    run = solve_jenkins_serrin(m, d, cfg.schedule(), h_target=cfg.h_target, tol=cfg.tol)
    log.info("solved %d caps in %.2fs on %d vertices", len(run), time.perf_counter() - t0, run.mesh.n_vertices)
    if not run.fields:
        man.note(f"first cap failed: {run.error}")
        man.finish("failed")
        print(f"error: first cap failed: {run.error}", file=sys.stderr)
        return EXIT_PARTIAL
    fields = run.fields
    checks: list[tuple[str, bool, str]] = []
    diag: list[str] = []
    if want["fields"]:
        man.write("fields.csv", fields_table(fields), "vertex values per cap")
    if want["vtk"]:
        man.write("fields.vtk", vtk_text(run.mesh, fields), "legacy VTK unstructured grid")
    if want["flux"]:
        reports = [flux_report(f, d) for f in fields]
        man.write("flux.csv", _flux_rows(reports), "per-edge flux per cap")
        man.write("flux.txt", "".join(r.as_text() for r in reports), "flux reports")
        for fr in reports:
            checks.append((f"flux bound cap {fr.cap:g}", fr.bound_ok(), f"max |F|-L_f = {np.max(np.abs(fr.flux) - fr.f_length):.3g}"))
            checks.append((f"flux balance cap {fr.cap:g}", fr.balance_ok(), f"|total| = {abs(fr.total):.3g}"))
    if want["divergence"] and len(fields) >= 3:
        div = classify_convergence(fields, cfg.threshold, m=m)
        man.write("divergence.txt", div.as_text(), "divergence report")
        man.write("divergence.csv", rows_to_csv(div.csv_rows()), "interface polylines")
        all_reports = [div]
        for h in cfg.verify_h:
            extra = solve_jenkins_serrin(m, d, cfg.schedule(), h_target=h, tol=cfg.tol)
            if extra.complete:
                all_reports.append(classify_convergence(extra.fields, cfg.threshold, m=m))
            else:
                man.note(f"verification run at h={h:g} failed: {extra.error}")
        sv = verify_divergence_structure(m, d, all_reports, kf_tol=cfg.kf_tol)
        man.write("structure.txt", sv.as_text(), "divergence structure verification")
        checks.append(("divergence structure", sv.passed, f"{sum(not f.passed for f in sv.findings)} failed findings"))
        if verdict.passes:
            checks.append(("no divergence under the structural condition", div.empty,
                           f"{int(np.sum(div.divergent_cells))} divergent cells"))
    if len(fields) >= 2:
        worst = max(comparison_check(a, b).worst_violation for a, b in zip(fields, fields[1:]))
        diag.append(f"cap monotonicity worst violation: {worst:.3g}")
    centre = [float(f.value_at(np.array([d.centroid()]))[0]) for f in fields]
    diag.append("centroid values: " + ", ".join(f"{v:.10g}" for v in centre))
    if want["checks"]:
        lines = [f"check: {name}: {'pass' if ok else 'fail'} ({why})" for name, ok, why in checks]
        lines += [f"diagnostic: {x}" for x in diag]
        man.write("checks.txt", "\n".join(lines) + "\n", "checks and diagnostics")
    for name, ok, why in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name} ({why})")
    for x in diag:
        print(f"note {x}")
    if not run.complete:
        man.note(f"cap index {run.failed_at} failed: {run.error}")
        man.finish("partial")
        return EXIT_PARTIAL
    ok = all(c[1] for c in checks)
    man.finish("complete" if ok else "complete-with-failed-checks")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_flux(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    m, d, report, verdict = _existence(cfg)
    if not report.valid:
        sys.stdout.write(_verdict_text(None, report))
        return EXIT_FAIL
    run = solve_jenkins_serrin(m, d, cfg.schedule(), h_target=cfg.h_target, tol=cfg.tol)
    ok = True
    for f in run.fields:
        fr = flux_report(f, d)
        sys.stdout.write(fr.as_text())
        ok &= fr.bound_ok() and fr.balance_ok()
    if args.path is not None and run.fields:
        g = read_curve_csv(args.path)
        F, L = flux(run.fields[-1], g, side=args.side)
        print(f"path_flux: {F:.17g}")
        print(f"path_f_length: {L:.17g}")
        ok &= abs(F) <= L + 1e-6
    if not run.complete:
        return EXIT_PARTIAL
    return EXIT_OK if ok else EXIT_FAIL


def cmd_example(args) -> int:
    if args.name is None:
        print("\n".join(EXAMPLES))
        return EXIT_OK
    if args.name not in EXAMPLES:
        raise UsageError(f"unknown example {args.name!r}; choose from {', '.join(EXAMPLES)}")
    sys.stdout.write(EXAMPLES[args.name])
    return EXIT_OK


# ---------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="jsgraph", description="Jenkins-Serrin graphs of translating solitons.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1; runs are reproducible only with 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def metric_args(q):
        q.add_argument("--metric", required=True, choices=sorted(BUILTIN_MODELS))
        q.add_argument("--c", type=float, default=1.0)

    g = sub.add_parser("geodesic", help="shoot or connect f-geodesics, CSV out")
    gs = g.add_subparsers(dest="action", required=True, parser_class=_Parser)
    shoot = gs.add_parser("shoot")
    metric_args(shoot)
    shoot.add_argument("--from", dest="start", type=_point, required=True)
    shoot.add_argument("--angle", type=float, required=True, help="flat tangent angle in radians")
    shoot.add_argument("--len", type=float, required=True, help="maximum flat length")
    conn = gs.add_parser("connect")
    metric_args(conn)
    conn.add_argument("--from", dest="start", type=_point, required=True)
    conn.add_argument("--to", type=_point, required=True)
    for q in (shoot, conn):
        q.add_argument("--spacing", type=float, default=0.005)
        q.add_argument("--out", type=Path)
    g.set_defaults(func=cmd_geodesic)

    fl = sub.add_parser("flength", help="f-length of a curve")
    metric_args(fl)
    fl.add_argument("--curve", type=Path, help="CSV with x,t columns")
    fl.add_argument("--reaper", type=_triple, help="grim reaper arc s,r,height")
    fl.add_argument("--segment", type=lambda s: (_point(",".join(s.split(",")[:2])), _point(",".join(s.split(",")[2:]))),
                    help="straight segment x0,t0,x1,t1")
    fl.set_defaults(func=cmd_flength)

    ck = sub.add_parser("check", help="validate a domain and evaluate the structural conditions")
    ck.add_argument("config", type=Path)
    ck.set_defaults(func=cmd_check)

    for name, func, helptext in (("solve", cmd_solve, "run the cap continuation and write outputs"),
                                 ("flux", cmd_flux, "solve and print flux reports")):
        q = sub.add_parser(name, help=helptext)
        q.add_argument("config", type=Path)
        q.add_argument("--caps", type=_caps)
        q.add_argument("--h", type=float)
        q.add_argument("--allow-divergent", action="store_true")
        if name == "solve":
            q.add_argument("--out", type=Path)
        else:
            q.add_argument("--path", type=Path, help="CSV path for an extra flux line integral (last cap)")
            q.add_argument("--side", type=int, choices=(1, -1), default=1)
        q.set_defaults(func=func)

    ex = sub.add_parser("example", help="print a ready-made config")
    ex.add_argument("name", nargs="?")
    ex.set_defaults(func=cmd_example)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("usage error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    if args.threads > 1:
        log.warning("assembly is single-threaded; --threads %d has no effect", args.threads)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ContractError, DomainError, ChartError) as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except (SolverError, MeshError, IntegrationError, GeodesicConnectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
