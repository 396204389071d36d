"""Command-line entry point: ``dampwave <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 failed verification.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import specfun
from .curves import classify, classify_exponents
from .frame import FitRefused, FrameConfig, frame_exponent_fit, frame_sweep
from .functionals import FunctionalSeries, compute_Cfg, gamma_threshold
from .harness import emit_report, region_map, sweep, write_region_csv
from .params import ConfigurationError, GridConfig, ModelParams, params_from_mapping, parse_config_text
from .solver import build_initial_data, make_grid, run_until_blowup
from .verification import (
    CLOSED_FORM_CHECKS,
    RUN_CHECKS,
    all_passed,
    closed_form_suite,
    run_suite,
)

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 2, 3

log = logging.getLogger("dampwave")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


DEFAULT_STEPS = 60


def _range3(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError("expected lo:hi or lo:hi:steps")
    steps = int(parts[2]) if len(parts) == 3 else DEFAULT_STEPS
    return float(parts[0]), float(parts[1]), steps


def _load(args) -> tuple[dict, ModelParams, GridConfig]:
    raw = parse_config_text(Path(args.config).read_text()) if getattr(args, "config", None) else {}
    params, grid = params_from_mapping(raw)
    return raw, params, grid


def _out(args, default: str = ".") -> Path:
    out = Path(getattr(args, "out", None) or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- subcommands


def cmd_curve(args) -> int:
    raw, params, _ = _load(args)
    N = args.N if args.N is not None else params.N
    mu1 = args.mu1 if args.mu1 is not None else params.mu1.mu
    mu2 = args.mu2 if args.mu2 is not None else params.mu2.mu
    if args.action == "classify":
        p = args.p if args.p is not None else params.p
        q = args.q if args.q is not None else params.q
        res = classify_exponents(N, mu1, mu2, p, q).to_dict()
        res.update({"N": N, "mu1": mu1, "mu2": mu2, "p": p, "q": q})
        print(json.dumps(res, indent=2, sort_keys=True))
        return EXIT_OK
    return _write_map(args, raw, N, mu1, mu2)


def _write_map(args, raw, N, mu1, mu2) -> int:
    p_range = args.p_range or tuple(raw.get("p_range", (1.05, 4.0, DEFAULT_STEPS)))
    q_range = args.q_range or tuple(raw.get("q_range", (1.05, 4.0, DEFAULT_STEPS)))
    if args.steps is not None:
        p_range, q_range = (*p_range[:2], args.steps), (*q_range[:2], args.steps)
    rows = region_map(N, mu1, mu2, p_range, q_range)
    out = _out(args)
    write_region_csv(rows, out / "regionmap.csv")
    print(out / "regionmap.csv")
    return EXIT_OK


def cmd_map(args) -> int:
    raw, params, _ = _load(args)
    N = args.N if args.N is not None else params.N
    mu1 = args.mu1 if args.mu1 is not None else params.mu1.mu
    mu2 = args.mu2 if args.mu2 is not None else params.mu2.mu
    return _write_map(args, raw, N, mu1, mu2)


# argument tuple of each function in batch mode
_SPECFUN_ARGS = {
    "K": ("nu", "t"),
    "phi": ("N", "r"),
    "rho": ("mu", "t"),
    "rholog": ("mu", "t"),
    "gamma": ("mu", "t"),
    "psi": ("mu", "N", "r", "t"),
    "m": ("mu", "t"),
}


def _specfun_value(fn: str, a: dict) -> float:
    if fn == "K":
        return float(specfun.modified_bessel_k(a["nu"], a["t"]))
    if fn == "phi":
        return float(specfun.phi_radial(int(a["N"]), a["r"]))
    if fn == "rho":
        return float(specfun.rho(a["mu"], a["t"]))
    if fn == "rholog":
        return float(specfun.rho_log_deriv(a["mu"], a["t"]))
    if fn == "gamma":
        return float(specfun.gamma_coeff(a["mu"], a["t"]))
    if fn == "psi":
        return float(specfun.psi(a["mu"], int(a["N"]), a["r"], a["t"]))
    return float(specfun.multiplier_m(a["mu"], a["t"]))


def cmd_specfun(args) -> int:
    names = _SPECFUN_ARGS[args.fn]
    given = {k: getattr(args, k) for k in names}
    try:
        if all(v is not None for v in given.values()) and not args.batch:
            print(f"{_specfun_value(args.fn, given):.17g}")
            return EXIT_OK
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(names + ("value",))
        for lineno, line in enumerate(sys.stdin, 1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != len(names):
                raise ConfigurationError(f"stdin line {lineno}: expected {len(names)} values {names}")
            vals = dict(zip(names, (float(x) for x in fields)))
            w.writerow(fields + [f"{_specfun_value(args.fn, vals):.17g}"])
    except (ValueError, ArithmeticError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from exc
    return EXIT_OK


def cmd_solve(args) -> int:
    _, params, grid = _load(args)
    horizon = args.horizon if args.horizon is not None else grid.horizon
    outcome = run_until_blowup(params, horizon=horizon, grid=grid)
    out = _out(args)
    outcome.series.write(out)
    res = outcome.to_dict()
    res["params"] = params.to_dict()
    _dump(res, out / "outcome.json")
    print(json.dumps(outcome.to_dict(), sort_keys=True))
    return EXIT_OK


def _frame_template(args, raw, params: ModelParams) -> FrameConfig:
    """Frame template with initial value C6/8 (eps = 1); constants from --run, config or defaults."""
    C1 = raw.get("C1", 1.0) if args.C1 is None else args.C1
    if args.run:
        c = FunctionalSeries.read(args.run).constants
        if c.get("T2_emp") is None:
            raise ConfigurationError(f"run {args.run} has no located T2")
        C6, T2 = float(c["C6"]), float(c["T2_emp"])
    else:
        C6 = raw.get("C6")
        if C6 is None:
            # without a run the coercivity constants are unknown; fall back on C(f_i, g_i)
            r = make_grid(params.R / 64.0, params.R + 0.5)
            data = build_initial_data(params, r)
            C6 = min(compute_Cfg(data, 1, params.mu1.mu, params.N), compute_Cfg(data, 2, params.mu2.mu, params.N))
        T2 = raw.get("T2")
        if T2 is None:
            starts = [gamma_threshold(m, 1.0 + 1e-9, 100.0) for m in (params.mu1.mu, params.mu2.mu)]
            if None in starts:
                raise ConfigurationError("no T2 satisfies the Gamma criteria")
            T2 = max(starts)
    return FrameConfig.for_instance(params.replace(eps=1.0), C6, T2, C1=C1)


def _frame_csv(path: Path, eps, results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("eps", "T_div", "status"))
        for e, r in zip(eps, results):
            w.writerow((f"{e:.17g}", "" if r.T_div is None else f"{r.T_div:.17g}", r.status))


def cmd_frame(args) -> int:
    raw, params, _ = _load(args)
    tmpl = _frame_template(args, raw, params)
    out = _out(args)
    if args.action == "run":
        eps = [args.eps if args.eps is not None else params.eps]
        results = frame_sweep(tmpl, eps)
        _frame_csv(out / "frame.csv", eps, results)
        print(json.dumps({"eps": eps[0], "status": results[0].status, "T_div": results[0].T_div}))
        return EXIT_OK
    eps = _floats(args.eps_list) if args.eps_list else raw.get("eps_list")
    if not eps:
        raise ConfigurationError("frame sweep needs --eps or eps_list")
    case = classify(params).case_label
    try:
        fit, results = frame_exponent_fit(tmpl, eps, 1.0, case, args.min_decades)
    except FitRefused as exc:
        results = frame_sweep(tmpl, eps)
        _frame_csv(out / "frame.csv", eps, results)
        _dump({"refused": str(exc), "censored_eps": exc.censored_eps, "case": case}, out / "fit.json")
        return EXIT_OK
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    _frame_csv(out / "frame.csv", eps, results)
    _dump({"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2, "case": fit.case, "flagged": fit.flagged,
           "n": fit.n}, out / "fit.json")
    print(json.dumps(fit.to_dict()))
    return EXIT_OK


def cmd_verify(args) -> int:
    name = args.name
    if name != "all" and name not in CLOSED_FORM_CHECKS + RUN_CHECKS:
        raise ConfigurationError(f"unknown check {name!r}")
    if name in RUN_CHECKS and not args.run:
        raise ConfigurationError(f"check {name!r} needs --run <dir>")
    reports = []
    if name == "all" or name in CLOSED_FORM_CHECKS:
        reports += closed_form_suite(names=None if name == "all" else [name])
    if args.run and (name == "all" or name in RUN_CHECKS):
        series = FunctionalSeries.read(args.run)
        reports += run_suite(series, None if name == "all" else [name])
    out = _out(args)
    _dump([r.to_dict() for r in reports], out / "checks.json")
    for r in reports:
        print(f"{r.status:13s} {r.margin: .3e}  {r.check_name}")
    return EXIT_OK if all_passed(reports) else EXIT_VERIFY


def cmd_sweep(args) -> int:
    raw, params, grid = _load(args)
    eps = _floats(args.eps_list) if args.eps_list else raw.get("eps_list")
    if not eps:
        raise ConfigurationError("sweep needs --eps or eps_list")
    jobs = args.jobs or int(raw.get("jobs", 1))
    try:
        report, outcomes = sweep(params, grid, eps, horizon=args.horizon, jobs=jobs, C1=raw.get("C1", 1.0),
                                 min_decades=args.min_decades)
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from exc
    out = _out(args)
    if "p_range" in raw or "q_range" in raw:
        report.region_map = region_map(params.N, params.mu1.mu, params.mu2.mu,
                                       tuple(raw.get("p_range", (1.05, 4.0, 60))),
                                       tuple(raw.get("q_range", (1.05, 4.0, 60))))
    emit_report(report, out)
    for e, o in zip(eps, outcomes):
        run_dir = out / "runs" / f"eps_{e:.6g}"
        o.series.write(run_dir)
        _dump(o.to_dict(), run_dir / "outcome.json")
    summary = {k: report.to_dict()[k] for k in ("pde_fit", "frame_fit", "agreement_ratio", "warnings")}
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="flat key = value configuration file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="parallel worker processes")

    ap = argparse.ArgumentParser(prog="dampwave", parents=[common],
                                 description="Blow-up experiments for damped coupled wave systems.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def instance_flags(p):
        p.add_argument("--N", type=int)
        p.add_argument("--mu1", type=float)
        p.add_argument("--mu2", type=float)

    def map_flags(p):
        p.add_argument("--p-range", type=_range3, help="lo:hi or lo:hi:steps")
        p.add_argument("--q-range", type=_range3, help="lo:hi or lo:hi:steps")
        p.add_argument("--steps", type=int, help="grid points per axis (overrides range steps)")

    p = sub.add_parser("curve", parents=[common], help="exponent curves and region classification")
    p.add_argument("action", choices=("classify", "map"))
    instance_flags(p)
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    map_flags(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("map", parents=[common], help="region map CSV over a (p, q) grid")
    instance_flags(p)
    map_flags(p)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("specfun", parents=[common], help="evaluate special functions")
    p.add_argument("action", choices=("eval",))
    p.add_argument("--fn", required=True, choices=tuple(_SPECFUN_ARGS))
    for name in ("mu", "nu", "r", "t"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--N", type=int)
    p.add_argument("--batch", action="store_true",
                   help="read whitespace separated argument tuples from stdin, write CSV")
    p.set_defaults(func=cmd_specfun)

    p = sub.add_parser("solve", parents=[common], help="run the radial solver until blow-up")
    p.add_argument("--horizon", type=float)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("frame", parents=[common], help="iteration-frame ODE runs and sweeps")
    p.add_argument("action", choices=("run", "sweep"))
    p.add_argument("--eps", dest="eps_list", help="comma separated eps values (sweep)")
    p.add_argument("--at", dest="eps", type=float, help="eps for a single run")
    p.add_argument("--run", help="run directory providing C6 and T2")
    p.add_argument("--C1", type=float)
    p.add_argument("--min-decades", type=float, default=2.0)
    p.set_defaults(func=cmd_frame)

    p = sub.add_parser("verify", parents=[common], help="identity and inequality checkers")
    p.add_argument("name", help="all or one of: " + ", ".join(CLOSED_FORM_CHECKS + RUN_CHECKS))
    p.add_argument("--run", help="run directory with series.csv and constants.json")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", parents=[common], help="eps sweep with lifespan and frame fits")
    p.add_argument("--eps", dest="eps_list", help="comma separated eps values")
    p.add_argument("--horizon", type=float)
    p.add_argument("--min-decades", type=float, default=1.5)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
