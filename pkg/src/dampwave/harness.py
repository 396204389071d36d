"""Experiment orchestration: eps sweeps, lifespan fits, frame comparison, region maps."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .curves import OUTSIDE, SUBCRITICAL, classify, classify_exponents
from .frame import (
    DIVERGED,
    FitRefused,
    FrameConfig,
    fit_lifespan,
    frame_exponent_fit,
    integrate_frame,
)
from .params import GridConfig, ModelParams, config_hash
from .solver import RunOutcome, run_until_blowup

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
# relative spread of consecutive-pair slopes above which the fit is flagged as pre-asymptotic
CURVATURE_WARN = 0.10
C1_SENSITIVITY = (0.1, 1.0, 10.0)
REGION_COLUMNS = ("p", "q", "omega_mu", "omega_sigma", "lambda_pq", "lambda_qp",
                  "lambda_pq_sigma", "lambda_qp_sigma", "case_label")


@dataclass
class RunSummary:
    eps: float
    status: str
    T_blowup: float | None
    peak_ut: float
    peak_vt: float
    cone_ok: bool = True
    C6: float | None = None
    T2_emp: float | None = None

    @classmethod
    def from_outcome(cls, eps: float, out: RunOutcome) -> "RunSummary":
        c = out.series.constants if out.series is not None else {}
        return cls(eps, out.status, out.T_blowup, out.peak_ut, out.peak_vt, out.cone_ok,
                   _finite_or_none(c.get("C6")), c.get("T2_emp"))


@dataclass
class ExperimentReport:
    params: dict
    eps_list: list
    runs: list
    pde_fit: dict | None
    frame_fit: dict | None
    omega_mu: float
    omega_sigma: float
    case_label: str
    literal_exponent: float | None
    inverse_exponent: float | None
    agreement_ratio: float | None
    provenance: dict
    frame_runs: list = field(default_factory=list)
    c1_sensitivity: dict = field(default_factory=dict)
    curvature: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    region_map: list = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return _clean(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        d = dict(d)
        d["runs"] = [RunSummary(**r) for r in d["runs"]]
        return cls(**d)


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _clean(obj):
    """JSON-safe copy: NaN/inf become None, numpy scalars become Python floats."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return _finite_or_none(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fit_curvature(eps, T) -> dict:
    """Slopes of consecutive log-log pairs and their relative spread."""
    le, lt = np.log(np.asarray(eps, float)), np.log(np.asarray(T, float))
    order = np.argsort(le)
    le, lt = le[order], lt[order]
    local = np.diff(lt) / np.diff(le)
    if local.size < 2:
        return {"local_slopes": local.tolist(), "spread": 0.0}
    spread = float((local.max() - local.min()) / abs(np.mean(local)))
    return {"local_slopes": local.tolist(), "spread": spread}


def _run_one(args) -> RunOutcome:
    params, grid, horizon = args
    return run_until_blowup(params, horizon=horizon, grid=grid)


def run_eps(params: ModelParams, grid: GridConfig, eps_list, horizon: float | None = None,
            jobs: int = 1) -> list[RunOutcome]:
    """Solve once per eps; runs are independent and optionally spread over processes."""
    tasks = [(params.replace(eps=float(e)), grid, horizon) for e in eps_list]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_one, tasks))
    return [_run_one(t) for t in tasks]


def frame_template_from(outcomes, eps_list, params: ModelParams, C1: float = 1.0) -> tuple[FrameConfig, float] | None:
    """Frame started from the calibration (T2, C6) of the median calibrated run.

    Returns (template with eps = 1 initial values, eps of the reference run).
    """
    cal = [(e, o) for e, o in zip(eps_list, outcomes)
           if o.series is not None and o.series.constants.get("T2_emp") is not None
           and _finite_or_none(o.series.constants.get("C6"))]
    if not cal:
        return None
    cal.sort(key=lambda eo: eo[0])
    e_ref, o_ref = cal[len(cal) // 2]
    c = o_ref.series.constants
    tmpl = FrameConfig.for_instance(params.replace(eps=1.0), float(c["C6"]), float(c["T2_emp"]), C1=C1)
    return tmpl, e_ref


def assemble_report(params: ModelParams, grid: GridConfig, eps_list, outcomes,
                    frame_template: FrameConfig | None = None, frame_eps_ref: float | None = None,
                    min_decades: float = 1.5, C1: float = 1.0) -> ExperimentReport:
    """Fit PDE lifespans and the matching frame sweep; never raises on censored data."""
    eps_list = [float(e) for e in eps_list]
    cls = classify(params)
    summaries = [RunSummary.from_outcome(e, o) for e, o in zip(eps_list, outcomes)]
    warnings = []
    fit_case = cls.case_label if cls.case_label != OUTSIDE else SUBCRITICAL

    done = [s for s in summaries if s.status == "blew_up" and s.T_blowup]
    pde_fit = None
    curvature = {}
    if len(done) >= 2:
        e_ok = [s.eps for s in done]
        T_ok = [s.T_blowup for s in done]
        pde_fit = fit_lifespan(e_ok, T_ok, fit_case, params.p, params.q).to_dict()
        pde_fit["monotone"] = bool(np.all(np.diff(np.array(T_ok)[np.argsort(e_ok)]) < 0))
        if len(done) < len(summaries):
            warnings.append(f"{len(summaries) - len(done)} censored runs excluded from the PDE fit")
        if fit_case == SUBCRITICAL:
            curvature = _fit_curvature(e_ok, T_ok)
            if curvature["spread"] > CURVATURE_WARN:
                warnings.append("log-log lifespan data show curvature: measured eps range may be pre-asymptotic")
    else:
        warnings.append("too few blown-up runs for a PDE lifespan fit")
    if any(not s.cone_ok for s in summaries):
        warnings.append("support cone check failed in at least one run")

    if frame_template is None and outcomes:
        got = frame_template_from(outcomes, eps_list, params, C1)
        if got is not None:
            frame_template, frame_eps_ref = got
    frame_fit, frame_runs, sensitivity = None, [], {}
    if frame_template is not None:
        ref = 1.0 if frame_eps_ref is None else frame_eps_ref
        try:
            fit, results = frame_exponent_fit(frame_template, eps_list, 1.0, fit_case, min_decades)
            frame_fit = fit.to_dict()
        except FitRefused as exc:
            warnings.append(f"frame fit refused: {exc}")
            results = None
        except ValueError as exc:
            warnings.append(f"frame fit skipped: {exc}")
            results = None
        if results is not None:
            frame_runs = [{"eps": e, "T_div": r.T_div, "status": r.status, "sharp": r.sharp}
                          for e, r in zip(eps_list, results)]
        for c1 in C1_SENSITIVITY:
            r = integrate_frame(frame_template.replace(C1=c1, L1_0=frame_template.L1_0 * ref,
                                                       L2_0=frame_template.L2_0 * ref))
            sensitivity[f"{c1:g}"] = r.T_div if r.status == DIVERGED else None
        sensitivity["eps"] = ref

    agreement = None
    if pde_fit and frame_fit and frame_fit["slope"] != 0:
        agreement = pde_fit["slope"] / frame_fit["slope"]
    om = cls.omega_mu
    prov = {
        "config_hash": config_hash(params, grid),
        "grid": dataclasses.asdict(grid),
        "seeds": None,
        "version": __version__,
        "fit_case": fit_case,
        "frame_T2": frame_template.T2 if frame_template else None,
        "frame_C1": frame_template.C1 if frame_template else None,
        "frame_eps_ref": frame_eps_ref,
    }
    return ExperimentReport(
        params=params.to_dict(), eps_list=eps_list, runs=summaries, pde_fit=pde_fit, frame_fit=frame_fit,
        omega_mu=om, omega_sigma=cls.omega_sigma, case_label=cls.case_label,
        literal_exponent=-om if om > 0 else None, inverse_exponent=-1.0 / om if om > 0 else None,
        agreement_ratio=agreement, provenance=prov, frame_runs=frame_runs, c1_sensitivity=sensitivity,
        curvature=curvature, warnings=warnings,
    )


def sweep(params: ModelParams, grid: GridConfig, eps_list, horizon: float | None = None, jobs: int = 1,
          C1: float = 1.0, min_decades: float = 1.5) -> tuple[ExperimentReport, list[RunOutcome]]:
    """Solve per eps, fit per lifespan case, run the matching frame sweep."""
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 4:
        raise ValueError("a sweep needs at least 4 eps values")
    outcomes = run_eps(params, grid, eps_list, horizon, jobs)
    report = assemble_report(params, grid, eps_list, outcomes, min_decades=min_decades, C1=C1)
    return report, outcomes


def region_map(N: int, mu1: float, mu2: float, p_range, q_range) -> list[dict]:
    """Grid of both Omega values and the case label; ranges are (lo, hi, steps)."""
    rows = []
    for rng in (p_range, q_range):
        if int(rng[2]) < 1:
            raise ValueError("step counts must be positive")
    for p in np.linspace(p_range[0], p_range[1], int(p_range[2])):
        for q in np.linspace(q_range[0], q_range[1], int(q_range[2])):
            c = classify_exponents(N, mu1, mu2, float(p), float(q))
            rows.append({"p": float(p), "q": float(q), "omega_mu": c.omega_mu, "omega_sigma": c.omega_sigma,
                         "lambda_pq": c.lambda_pq, "lambda_qp": c.lambda_qp,
                         "lambda_pq_sigma": c.lambda_pq_sigma, "lambda_qp_sigma": c.lambda_qp_sigma,
                         "case_label": c.case_label})
    return rows


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


def write_region_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REGION_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[k]) for k in REGION_COLUMNS])


def emit_report(report: ExperimentReport, out_dir) -> Path:
    """Write report.json, lifespan.csv and regionmap.csv into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    with open(out / "lifespan.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("eps", "T", "status"))
        for s in report.runs:
            w.writerow((_fmt(s.eps), _fmt(s.T_blowup), s.status))
    write_region_csv(report.region_map, out / "regionmap.csv")
    return out


def load_report(out_dir) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads((Path(out_dir) / "report.json").read_text()))
