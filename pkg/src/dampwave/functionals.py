"""Blow-up functionals evaluated along a numerical solution.

All spatial integrals are trapezoid sums on the solver grid, restricted to the
numerical light cone r <= t + R + 2h (outside of it the solution is below the
support floor, see :func:`dampwave.solver.check_support_cone`).  Exponential
weights are combined as exp(r - t) so that large radii never overflow.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .params import ConfigurationError, DataAdmissibilityError, ModelParams
from .specfun import (
    DEFAULT_CONFIG,
    QuadratureConfig,
    _gauss_legendre,
    gamma_coeff,
    phi_radial_scaled,
    rho,
    rho_log_deriv,
    rho_scaled,
    sphere_area,
)

SERIES_COLUMNS = ("t", "F1", "F2", "Ft1", "Ft2", "G1", "G2", "Gt1", "Gt2", "L1", "L2",
                  "max_ut", "max_vt", "NL1", "NL2", "H1", "H2")


def _surface(N: int) -> float:
    return sphere_area(N - 1)


class RadialQuadrature:
    """Trapezoid weights |S^{N-1}| r^{N-1} dr on a uniform radial grid."""

    def __init__(self, N: int, r: np.ndarray, cfg: QuadratureConfig = DEFAULT_CONFIG):
        self.N = N
        self.r = r
        self.h = float(r[1] - r[0])
        w = np.full(r.size, self.h)
        w[0] *= 0.5
        self.w = _surface(N) * w * r ** (N - 1)
        if N == 2:
            # f(r) r is odd at the origin: Euler-Maclaurin end correction h^2/12 f(0)
            self.w[0] = _surface(N) * self.h ** 2 / 12.0
        self.phi_s = phi_radial_scaled(N, r, cfg)

    def cone(self, t: float, R: float) -> int:
        return min(self.r.size, int(math.floor((t + R) / self.h + 1e-9)) + 3)

    def phi_weight(self, t: float, n: int) -> np.ndarray:
        """Quadrature weight times exp(-t) phi(r) on the first n nodes."""
        return self.w[:n] * self.phi_s[:n] * np.exp(self.r[:n] - t)

    def integrate_phi(self, values: np.ndarray) -> float:
        """int values * phi dx over the support of ``values`` (time zero weighting)."""
        nz = np.nonzero(values)[0]
        if nz.size == 0:
            return 0.0
        n = int(nz[-1]) + 1
        return float(np.dot(self.phi_weight(0.0, n), values[:n]))


def compute_F(state, which: int, quad: RadialQuadrature, R: float) -> float:
    """F_i(t) = exp(-t) int u phi dx (v for i = 2)."""
    n = quad.cone(state.t, R)
    field_ = state.u if which == 1 else state.v
    return float(np.dot(quad.phi_weight(state.t, n), field_[:n]))


def compute_Ftilde(state, which: int, quad: RadialQuadrature, R: float) -> float:
    """F~_i(t) = exp(-t) int d_t u phi dx."""
    n = quad.cone(state.t, R)
    field_ = state.ut if which == 1 else state.vt
    return float(np.dot(quad.phi_weight(state.t, n), field_[:n]))


def _psi_weight(quad: RadialQuadrature, mu: float, t: float, n: int) -> np.ndarray:
    # psi = rho(t) phi(r) = rho_s(t) phi_s(r) exp(r - t - 1)
    return quad.phi_weight(t, n) * (rho_scaled(mu, t) * math.exp(-1.0))


def compute_G(state, which: int, mu: float, quad: RadialQuadrature, R: float) -> float:
    """G_i(t) = int u psi_i dx."""
    n = quad.cone(state.t, R)
    field_ = state.u if which == 1 else state.v
    return float(np.dot(_psi_weight(quad, mu, state.t, n), field_[:n]))


def compute_Gtilde(state, which: int, mu: float, quad: RadialQuadrature, R: float) -> float:
    """G~_i(t) = int d_t u psi_i dx."""
    n = quad.cone(state.t, R)
    field_ = state.ut if which == 1 else state.vt
    return float(np.dot(_psi_weight(quad, mu, state.t, n), field_[:n]))


def compute_Cfg(data, which: int, mu: float, N: int, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """C(f_i, g_i) = rho_i(0) int [(mu_i - rho_i'(0)/rho_i(0)) f_i phi + g_i phi] dx.

    Uses the unscaled profiles; eps does not enter.
    """
    quad = RadialQuadrature(N, data.r, cfg)
    f, g = data.f(which), data.g(which)
    coef = mu - float(rho_log_deriv(mu, 0.0, cfg))
    value = float(rho(mu, 0.0, cfg)) * (coef * quad.integrate_phi(f) + quad.integrate_phi(g))
    if not value > 0:
        raise DataAdmissibilityError(f"C(f{which}, g{which}) = {value:.6g} is not positive")
    return value


def psi_power_integral(mu: float, N: int, r_exponent: float, t: float, R: float,
                       nodes: int = 200, cfg: QuadratureConfig = DEFAULT_CONFIG) -> float:
    """int_{|x| <= t+R} psi(x, t)^r dx by Gauss-Legendre in the radius."""
    if not r_exponent > 1:
        raise ValueError("the psi power bound needs an exponent r > 1")
    x, w = _gauss_legendre(nodes)
    b = t + R
    s = 0.5 * b * (x + 1.0)
    ws = 0.5 * b * w
    # (rho phi)^r = (rho_s phi_s)^r exp(r (s - t - 1))
    vals = (phi_radial_scaled(N, s, cfg) * rho_scaled(mu, t, cfg)) ** r_exponent \
        * np.exp(r_exponent * (s - t - 1.0)) * s ** (N - 1)
    return float(_surface(N) * np.dot(ws, vals))


def psi_power_shape(mu: float, N: int, r_exponent: float, t) -> np.ndarray:
    """rho^r exp(r t) (1+t)^((2-r)(N-1)/2), the right-hand side without its constant."""
    t = np.asarray(t, dtype=float)
    return (rho_scaled(mu, t) * math.exp(-1.0)) ** r_exponent * (1.0 + t) ** ((2.0 - r_exponent) * (N - 1) / 2.0)


@dataclass
class FunctionalSeries:
    """Sampled functionals of one run plus the derived constants."""

    columns: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)

    @property
    def t(self) -> np.ndarray:
        return self.columns["t"]

    def __getitem__(self, key: str) -> np.ndarray:
        return self.columns[key]

    def __len__(self) -> int:
        return len(self.columns.get("t", ()))

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        cols = [c for c in SERIES_COLUMNS if c in self.columns]
        lines = [",".join(cols)]
        for i in range(len(self)):
            lines.append(",".join(f"{float(self.columns[c][i]):.17g}" for c in cols))
        (out / "series.csv").write_text("\n".join(lines) + "\n")
        (out / "constants.json").write_text(json.dumps(_jsonable(self.constants), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, run_dir) -> "FunctionalSeries":
        run = Path(run_dir)
        raw = np.genfromtxt(run / "series.csv", delimiter=",", names=True, ndmin=1)
        cols = {name: np.atleast_1d(np.asarray(raw[name], dtype=float)) for name in raw.dtype.names}
        constants = json.loads((run / "constants.json").read_text())
        return cls(cols, constants)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


class SeriesRecorder:
    """Accumulates functionals at sampling times of a running solve."""

    def __init__(self, params: ModelParams, data, r: np.ndarray, cfg: QuadratureConfig = DEFAULT_CONFIG):
        self.params = params
        self.quad = RadialQuadrature(params.N, r, cfg)
        self.rows: list[tuple] = []
        mu1, mu2 = params.mu1.mu, params.mu2.mu
        self.constants = {
            "eps": params.eps,
            "N": params.N, "mu1": mu1, "mu2": mu2, "p": params.p, "q": params.q, "R": params.R,
            "h": self.quad.h,
            "nonlinearity_on": params.nonlinearity_on,
            "int_f1_phi": self.quad.integrate_phi(data.f1),
            "int_f2_phi": self.quad.integrate_phi(data.f2),
            "int_g1_phi": self.quad.integrate_phi(data.g1),
            "int_g2_phi": self.quad.integrate_phi(data.g2),
        }
        for i, mu in ((1, mu1), (2, mu2)):
            try:
                self.constants[f"Cfg{i}"] = compute_Cfg(data, i, mu, params.N, cfg)
            except DataAdmissibilityError:
                self.constants[f"Cfg{i}"] = float("nan")

    def record(self, state) -> None:
        p_, q_ = self.params.p, self.params.q
        mu1, mu2 = self.params.mu1.mu, self.params.mu2.mu
        t = state.t
        n = self.quad.cone(t, self.params.R)
        wphi = self.quad.phi_weight(t, n)
        e = math.exp(-1.0)
        rho1, rho2 = float(rho_scaled(mu1, t)) * e, float(rho_scaled(mu2, t)) * e
        u, v, ut, vt = state.u[:n], state.v[:n], state.ut[:n], state.vt[:n]
        F1, F2 = float(wphi @ u), float(wphi @ v)
        Ft1, Ft2 = float(wphi @ ut), float(wphi @ vt)
        w1, w2 = wphi * rho1, wphi * rho2
        G1, G2 = float(w1 @ u), float(w2 @ v)
        Gt1, Gt2 = float(w1 @ ut), float(w2 @ vt)
        NL1 = float(w1 @ np.abs(vt) ** p_)
        NL2 = float(w2 @ np.abs(ut) ** q_)
        # psi_2^{p/(p-1)} psi_1^{-1/(p-1)} = phi rho_2^{p/(p-1)} rho_1^{-1/(p-1)}
        ball = float(np.sum(wphi))
        H1 = ball * rho2 ** (p_ / (p_ - 1.0)) * rho1 ** (-1.0 / (p_ - 1.0))
        H2 = ball * rho1 ** (q_ / (q_ - 1.0)) * rho2 ** (-1.0 / (q_ - 1.0))
        self.rows.append((t, F1, F2, Ft1, Ft2, G1, G2, Gt1, Gt2, math.nan, math.nan,
                          state.max_ut(), state.max_vt(), NL1, NL2, H1, H2))

    def finish(self) -> FunctionalSeries:
        arr = np.array(self.rows, dtype=float).reshape(-1, len(SERIES_COLUMNS))
        cols = {name: arr[:, i].copy() for i, name in enumerate(SERIES_COLUMNS)}
        return FunctionalSeries(cols, dict(self.constants))


def first_passage(t: np.ndarray, ok: np.ndarray, t_min: float, t_max: float) -> float | None:
    """Earliest sample time > t_min after which ``ok`` holds at every sample up to t_max."""
    sel = (t > t_min) & (t <= t_max)
    if not sel.any():
        return None
    idx = np.nonzero(sel)[0]
    bad = idx[~ok[idx]]
    if bad.size == 0:
        return float(t[idx[0]])
    after = idx[idx > bad[-1]]
    return float(t[after[0]]) if after.size else None


def gamma_threshold(mu: float, t_from: float, t_to: float, samples: int = 400) -> float | None:
    """Earliest grid time >= t_from after which 0 < Gamma < 8/3 holds on [t, t_to]."""
    grid = np.linspace(t_from, max(t_to, t_from + 1.0), samples)
    g = gamma_coeff(mu, grid)
    ok = (g > 0) & (0.25 - 3.0 * g / 32.0 > 0)
    if ok.all():
        return float(grid[0])
    bad = np.nonzero(~ok)[0]
    if bad[-1] == grid.size - 1:
        return None
    return float(grid[bad[-1] + 1])


def accumulate_L(series: FunctionalSeries, params: ModelParams, T2: float, C6: float):
    """Running trapezoid integrals L_i = (1/8) int_{T2}^t NL_i ds + C6 eps / 8.

    Returns (L1, L2) arrays aligned with the series; NaN before T2.
    """
    mu1, mu2 = params.mu1.mu, params.mu2.mu
    horizon = max(float(series.t[-1]), T2 + 1.0)
    for mu in (mu1, mu2):
        start = gamma_threshold(mu, T2, horizon)
        if start is None or start > T2 + 1e-12:
            raise ConfigurationError(f"T2={T2} violates the Gamma criteria for mu={mu}")
    t = series.t
    base = C6 * params.eps / 8.0
    out = []
    for key in ("NL1", "NL2"):
        L = np.full(t.size, np.nan)
        sel = np.nonzero(t >= T2 - 1e-12)[0]
        if sel.size:
            vals = series[key][sel]
            ts = t[sel]
            inc = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(ts))])
            L[sel] = base + inc / 8.0
        out.append(L)
    return out[0], out[1]


def calibrate(series: FunctionalSeries, params: ModelParams, T_end: float | None = None) -> FunctionalSeries:
    """Fit coercivity constants, locate T0/T1/T2, compute C6 and fill L1, L2.

    The coercivity constants are the minima of G_i/eps (and G~_i/eps) over
    [T0, 0.9 T_end]; T0 and T1 are first-passage times (> 1) after which the
    functionals stay positive; T2 is the first sample past T1 where the Gamma
    criteria hold.
    """
    eps = params.eps
    t = series.t
    T_end = float(t[-1]) if T_end is None else T_end
    t_max = 0.9 * T_end
    c = series.constants
    if eps <= 0:
        c.update({"T0_emp": None, "T1_emp": None, "T2_emp": None, "C6": 0.0})
        return series
    T0 = max((first_passage(t, series[k] > 0, 1.0, t_max) or math.inf) for k in ("G1", "G2"))
    T1 = max((first_passage(t, series[k] > 0, T0, t_max) or math.inf) for k in ("Gt1", "Gt2")) \
        if math.isfinite(T0) else math.inf
    T1 = max(T1, T0)
    if not math.isfinite(T1):
        c.update({"T0_emp": None if not math.isfinite(T0) else T0, "T1_emp": None, "T2_emp": None})
        return series
    window0 = (t >= T0) & (t <= t_max)
    window1 = (t >= T1) & (t <= t_max)
    for i in (1, 2):
        c[f"C_G{i}"] = float(np.min(series[f"G{i}"][window0]) / eps)
        c[f"C_Gt{i}"] = float(np.min(series[f"Gt{i}"][window1]) / eps)
    C6 = min(c["Cfg1"], c["Cfg2"], 8 * c["C_Gt1"], 8 * c["C_Gt2"])
    thresholds = [gamma_threshold(mu, T1, max(T_end, 100.0)) for mu in (params.mu1.mu, params.mu2.mu)]
    later = t[t > max([T1] + [th for th in thresholds if th is not None]) - 1e-12]
    T2 = float(later[0]) if later.size and None not in thresholds else None
    if T2 is not None and T2 <= T1:
        nxt = t[t > T1]
        T2 = float(nxt[0]) if nxt.size else None
    c.update({"T0_emp": T0, "T1_emp": T1, "T2_emp": T2, "C6": C6})
    if T2 is not None:
        L1, L2 = accumulate_L(series, params, T2, C6)
        series.columns["L1"], series.columns["L2"] = L1, L2
    return series


def holder_constant(series: FunctionalSeries, alpha_p: float, alpha_q: float, p: float, q: float) -> float:
    """Largest C with (1/8) H_i^{-(p-1)} >= C (1+t)^alpha at every sample t >= T2."""
    T2 = series.constants.get("T2_emp")
    t = series.t
    sel = t >= T2 - 1e-12
    c1 = series["H1"][sel] ** (-(p - 1.0)) / 8.0 / (1.0 + t[sel]) ** alpha_p
    c2 = series["H2"][sel] ** (-(q - 1.0)) / 8.0 / (1.0 + t[sel]) ** alpha_q
    return float(min(c1.min(), c2.min()))
