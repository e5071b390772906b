"""Command-line interface: validate, analyze, solve, bogomolov, selftest."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import calculus, checks
from .bundle import family_curvature_defect, is_simple
from .config import encode_matrix, load_config, validate_against
from .errors import AffineYMHError, ConfigError, NoSpectralGap, NotInvariant, SlopeDefectMismatch
from .geometry import astheno_defect, gauduchon_defect
from .hermitian import MetricField, bogomolov_integral, degree, einstein_factor, slope
from .solver import continuity_solve, extract_destabilizer
from .stability import invariant_subspaces, slope_defect, stability_verdict

log = logging.getLogger("affine_ymh")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3

MUTATIONS = {
    "wedge": "_wedge_sign",
    "dbar": "_dbar_sign",
    "nu": "_nu_sign",
}

TELEMETRY_COLUMNS = ("eps", "newton_iters", "residual_inf", "m_eps", "det_defect")


def _check_dict(check: checks.Check) -> dict:
    return {"name": check.name, "value": float(check.value), "tolerance": check.tolerance, "passed": check.passed}


def _witnesses(report) -> list:
    return [{"basis": encode_matrix(w.basis), "rank": w.rank, "slope": float(w.slope)} for w in report.witnesses]


def _initial_metric(cfg):
    if cfg.initial_metric is None:
        return None
    return MetricField.constant(cfg.torus, cfg.initial_metric)


# commands --------------------------------------------------------------------


def cmd_validate(cfg, args) -> tuple:
    torus, bundle = cfg.torus, cfg.bundle
    found = [checks.Check("gauduchon defect", gauduchon_defect(torus), 1e-8)]
    if torus.dim >= 2:
        found.append(checks.Check("astheno-Kaehler defect", astheno_defect(torus), 1e-8))
    for t in (0.0, 1.0):
        found.append(checks.Check(f"curvature of nabla + {t:g} phi", family_curvature_defect(bundle, t), 1e-10))
    found.append(checks.Check("negative volume", -min(0.0, torus.volume), 0.0))
    results = {"checks": [_check_dict(c) for c in found]}
    for c in found:
        log.info(c.line())
    return results, all(c.passed for c in found)


def cmd_analyze(cfg, args) -> tuple:
    torus, bundle = cfg.torus, cfg.bundle
    report = stability_verdict(bundle, torus)
    simple, _ = is_simple(bundle)
    results = {
        "gamma": einstein_factor(bundle, torus),
        "degree": degree(bundle, torus),
        "slope": slope(bundle, torus),
        "verdict": report.verdict,
        "mu_E": report.mu_E,
        "witnesses": _witnesses(report),
        "simple": simple,
    }
    log.info("verdict %s, degree %.3e, gamma %.3e, simple %s", report.verdict, results["degree"], results["gamma"], simple)
    return results, True


def _write_telemetry(trace, path: Path):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TELEMETRY_COLUMNS)
        for rec in trace.records + trace.zero_records:
            writer.writerow([f"{rec.eps:.6e}", rec.newton_iters, f"{rec.residual:.6e}", f"{rec.m_eps:.6e}", f"{rec.det_defect:.6e}"])


def cmd_solve(cfg, args) -> tuple:
    torus, bundle = cfg.torus, cfg.bundle
    trace = continuity_solve(bundle, torus, cfg.solver, _initial_metric(cfg))
    m_hist = [float(m) for m in trace.m_history]
    results = {
        "gamma": float(trace.gamma),
        "status": trace.status,
        "message": trace.message,
        "final_residual": float(trace.final_residual),
        "m_history": m_hist,
        "m_max": max(m_hist) if m_hist else 0.0,
        "steps": len(trace.records),
    }
    if trace.status == "converged":
        defects = []
        for basis in invariant_subspaces(bundle):
            entry = {"basis": encode_matrix(basis)}
            try:
                gap, a2, p2 = slope_defect(bundle, torus, trace.metric(), basis)
                entry.update(mu_gap=gap, A_norm2=a2, phi_tilde_norm2=p2, identity_holds=True)
            except SlopeDefectMismatch as exc:
                entry.update(identity_holds=False, error=str(exc))
            defects.append(entry)
        results["slope_defects"] = defects
    elif trace.status == "blowup":
        try:
            _, basis, rep = extract_destabilizer(trace)
            results["destabilizer"] = {
                "basis": encode_matrix(basis),
                "rank": rep["rank"],
                "mu_F": rep["mu_F"],
                "mu_E": rep["mu_E"],
                "destabilizing": rep["destabilizing"],
                "sigma": rep["sigma"],
                "identity_residuals": rep["identity_residuals"],
            }
        except (NoSpectralGap, NotInvariant) as exc:
            results["destabilizer"] = {"error": f"{type(exc).__name__}: {exc}"}
    out_dir = _out_dir(cfg, args)
    if args.csv or cfg.outputs.get("csv"):
        target = (out_dir or Path(".")) / f"{cfg.name}.telemetry.csv"
        target.parent.mkdir(parents=True, exist_ok=True)
        _write_telemetry(trace, target)
        log.info("telemetry written to %s", target)
    log.info("status %s, final |K - gamma| = %.3e, max m = %.3f", trace.status, trace.final_residual, results["m_max"])
    return results, True


def cmd_bogomolov(cfg, args) -> tuple:
    torus, bundle = cfg.torus, cfg.bundle
    H = _initial_metric(cfg) or MetricField.identity(torus, bundle.rank)
    results = {"astheno_defect": astheno_defect(torus), "bogomolov": bogomolov_integral(bundle, torus, H)}
    log.info("Bogomolov integral %.6e", results["bogomolov"])
    return results, results["bogomolov"] >= -1e-8


def run_selftest(grid: int = 16, mutate: str | None = None) -> tuple:
    original = None
    if mutate:
        name = MUTATIONS[mutate]
        original = getattr(calculus, name)
        # drop the sign factor entirely
        setattr(calculus, name, lambda *a: 1)
    try:
        suites = checks.identity_suites(grid=grid, per_bidegree=10, metrics=3)
    finally:
        if original is not None:
            setattr(calculus, MUTATIONS[mutate], original)
    found = [c for suite in suites.values() for c in suite]
    for c in found:
        log.info(c.line())
    return {"checks": [_check_dict(c) for c in found]}, all(c.passed for c in found)


COMMANDS = {
    "validate": cmd_validate,
    "analyze": cmd_analyze,
    "solve": cmd_solve,
    "bogomolov": cmd_bogomolov,
}


# plumbing --------------------------------------------------------------------


def _out_dir(cfg, args):
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.outputs.get("dir"):
        return Path(cfg.outputs["dir"])
    return None


def _to_json(obj):
    if isinstance(obj, dict):
        return {k: _to_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_json(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run_one(command: str, config_path, args) -> tuple:
    """Execute one command on one config; returns (report dict, exit code)."""
    start = time.perf_counter()
    scenario, cfg = {}, None
    try:
        if command == "selftest":
            results, ok = run_selftest(args.grid or 16, args.mutate)
        else:
            cfg = load_config(config_path, args.grid, args.eps_min)
            scenario = dict(cfg.raw)
            overrides = {k: v for k, v in (("grid", args.grid), ("eps_min", args.eps_min)) if v is not None}
            if overrides:
                scenario["overrides"] = overrides
            results, ok = COMMANDS[command](cfg, args)
        report = {"command": command, "scenario": scenario, "ok": bool(ok), "results": results}
        code = EXIT_OK if ok else EXIT_FAILED
    except ConfigError as exc:
        report = {"command": command, "scenario": scenario, "ok": False, "results": {}, "error": f"ConfigError: {exc}"}
        code = EXIT_CONFIG
    except AffineYMHError as exc:
        report = {"command": command, "scenario": scenario, "ok": False, "results": {}, "error": f"{type(exc).__name__}: {exc}"}
        code = EXIT_FAILED
    report = _to_json(report)
    report["timing"] = {"wall_time": time.perf_counter() - start}
    validate_against(report, "report", "report")
    if "error" in report:
        log.error(report["error"])
    name = cfg.name if cfg is not None else ("selftest" if command == "selftest" else Path(str(config_path)).stem)
    out_dir = _out_dir(cfg, args)
    text = json.dumps(report, indent=2, sort_keys=True, allow_nan=False)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{name}.{command}.json"
        path.write_text(text + "\n")
        log.info("report written to %s", path)
    else:
        print(text)
    return report, code


def _job(payload):
    command, path, args = payload
    _setup_logging(args.verbose)
    return run_one(command, path, args)[1]


def _setup_logging(verbose: int):
    level = logging.WARNING if verbose < 0 else (logging.INFO if verbose == 0 else logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    # solver step logs are noisy at INFO
    logging.getLogger("affine_ymh.solver").setLevel(logging.DEBUG if verbose > 0 else logging.WARNING)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="affine-ymh",
        description="Stability and Yang-Mills-Higgs metrics for flat Higgs bundles on affine tori.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="write JSON reports (and CSV telemetry) here")
    common.add_argument("--grid", type=int, metavar="N", help="override the grid resolution")
    common.add_argument("--eps-min", type=float, metavar="X", help="override the smallest continuation parameter")
    common.add_argument("--jobs", type=int, default=1, metavar="K", help="run several configs in parallel")
    common.add_argument("--csv", action="store_true", help="emit per-step solver telemetry as CSV")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("-q", "--quiet", action="store_const", const=-1, dest="verbose")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("validate", "check the torus metric and the flat Higgs bundle"),
        ("analyze", "degree, slope, Einstein factor and stability verdict"),
        ("solve", "run the continuity method"),
        ("bogomolov", "evaluate the Bogomolov integral"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--config", required=True, nargs="+", metavar="PATH")
    p = sub.add_parser("selftest", parents=[common], help="run the calculus and Chern identity suites")
    p.add_argument("--mutate", choices=sorted(MUTATIONS), help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    if args.command == "selftest":
        return run_one("selftest", None, args)[1]
    paths = args.config
    try:
        if args.jobs > 1 and len(paths) > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                codes = list(pool.map(_job, [(args.command, p, args) for p in paths]))
        else:
            codes = [run_one(args.command, p, args)[1] for p in paths]
    except Exception:  # noqa: BLE001 - anything escaping here is a bug, not a verdict
        log.exception("internal error")
        return EXIT_INTERNAL
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
