"""Iteration frame: the coupled lower-bound inequalities integrated as equalities.

    L1' = C1 (1+t)^alpha_p L2^p,   L2' = C1 (1+t)^alpha_q L1^q,   t >= T2,

with alpha_p = -(N-1)(p-1)/2 + mu1/2 - mu2 p/2 and the symmetric alpha_q.
Divergence times of this cooperative system, and power-law fits of them
against eps, are what the blow-up argument predicts for the PDE lifespan.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .curves import CRITICAL, DOUBLY_CRITICAL, SUBCRITICAL
from .params import ConfigurationError, ModelParams

DIVERGED = "diverged"
CENSORED = "censored"

# fits below this R^2 are flagged as not following the fitted law
FIT_R2_FLAG = 0.95


def frame_alphas(N: int, mu1: float, mu2: float, p: float, q: float) -> tuple[float, float]:
    alpha_p = -(N - 1) * (p - 1) / 2.0 + mu1 / 2.0 - mu2 * p / 2.0
    alpha_q = -(N - 1) * (q - 1) / 2.0 + mu2 / 2.0 - mu1 * q / 2.0
    return alpha_p, alpha_q


@dataclass(frozen=True)
class FrameConfig:
    C1: float
    T2: float
    L1_0: float
    L2_0: float
    alpha_p: float
    alpha_q: float
    p: float
    q: float
    divergence_threshold: float = 1e12
    horizon: float = 1e8

    def __post_init__(self):
        if self.C1 < 0:
            raise ConfigurationError("C1 must be nonnegative")
        if not self.T2 > 1:
            raise ConfigurationError("T2 must exceed 1")
        if not (self.L1_0 > 0 and self.L2_0 > 0):
            raise ConfigurationError("initial values must be positive")
        if not (self.p > 1 and self.q > 1):
            raise ConfigurationError("p, q must exceed 1")

    @classmethod
    def for_instance(cls, params: ModelParams, C6: float, T2: float, C1: float = 1.0, **kw) -> "FrameConfig":
        """Frame for an instance, started from C6 eps / 8 at T2."""
        ap, aq = frame_alphas(params.N, params.mu1.mu, params.mu2.mu, params.p, params.q)
        L0 = C6 * params.eps / 8.0
        return cls(C1=C1, T2=T2, L1_0=L0, L2_0=L0, alpha_p=ap, alpha_q=aq, p=params.p, q=params.q, **kw)

    def replace(self, **changes) -> "FrameConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class FrameResult:
    status: str
    T_div: float | None
    t_end: float
    sharp: bool = True
    t: np.ndarray | None = None
    L1: np.ndarray | None = None
    L2: np.ndarray | None = None


def integrate_frame(cfg: FrameConfig, dense: bool = False, rtol: float = 1e-8) -> FrameResult:
    """Solve the frame ODE pair with Dormand-Prince 5(4) until divergence or the horizon.

    Divergence is declared at the first time max(L1, L2) reaches the threshold.
    If the integrator gives up before (step-size underflow at the singularity)
    the run still counts as diverged at the current time with ``sharp=False``.
    """
    p, q, C1 = cfg.p, cfg.q, cfg.C1
    ap, aq = cfg.alpha_p, cfg.alpha_q
    log_thr = math.log(cfg.divergence_threshold)

    # log variables keep the terminal runaway well scaled
    def rhs(t, y):
        l1, l2 = y
        w = 1.0 + t
        # exponents clipped so the trial stages of the final step stay finite
        d1 = C1 * w ** ap * math.exp(min(p * l2 - l1, 700.0))
        d2 = C1 * w ** aq * math.exp(min(q * l1 - l2, 700.0))
        return [d1, d2]

    def hit(t, y):
        return max(y[0], y[1]) - log_thr

    hit.terminal = True
    hit.direction = 1
    y0 = [math.log(cfg.L1_0), math.log(cfg.L2_0)]
    if max(y0) >= log_thr:
        return FrameResult(DIVERGED, cfg.T2, cfg.T2)
    sol = solve_ivp(rhs, (cfg.T2, cfg.horizon), y0, method="RK45", rtol=rtol, atol=1e-12,
                    events=hit, dense_output=False)
    t_arr = sol.t if dense else None
    L1 = np.exp(sol.y[0]) if dense else None
    L2 = np.exp(sol.y[1]) if dense else None
    if sol.t_events[0].size:
        return FrameResult(DIVERGED, float(sol.t_events[0][0]), float(sol.t[-1]), True, t_arr, L1, L2)
    if sol.status == -1:
        return FrameResult(DIVERGED, float(sol.t[-1]), float(sol.t[-1]), False, t_arr, L1, L2)
    return FrameResult(CENSORED, None, float(sol.t[-1]), True, t_arr, L1, L2)


def frame_solution(cfg: FrameConfig, t_eval) -> tuple[np.ndarray, np.ndarray]:
    """(L1, L2) of the frame at the requested times (before divergence)."""
    t_eval = np.asarray(t_eval, dtype=float)
    res = integrate_frame(cfg.replace(horizon=float(t_eval[-1])), dense=False)
    stop = res.T_div if res.T_div is not None else float(t_eval[-1])
    keep = t_eval[t_eval <= stop]
    p, q, C1, ap, aq = cfg.p, cfg.q, cfg.C1, cfg.alpha_p, cfg.alpha_q

    def rhs(t, y):
        w = 1.0 + t
        return [C1 * w ** ap * math.exp(min(p * y[1] - y[0], 700.0)),
                C1 * w ** aq * math.exp(min(q * y[0] - y[1], 700.0))]

    out1 = np.full(t_eval.size, np.inf)
    out2 = np.full(t_eval.size, np.inf)
    if keep.size:
        sol = solve_ivp(rhs, (cfg.T2, float(keep[-1])), [math.log(cfg.L1_0), math.log(cfg.L2_0)],
                        method="RK45", rtol=1e-10, atol=1e-12, t_eval=keep)
        out1[: keep.size] = np.exp(sol.y[0])
        out2[: keep.size] = np.exp(sol.y[1])
    return out1, out2


@dataclass
class FitResult:
    case: str
    slope: float
    intercept: float
    r2: float
    n: int
    flagged: bool

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class FitRefused(ValueError):
    """A lifespan fit was asked for data containing censored runs."""

    def __init__(self, censored_eps):
        super().__init__(f"censored runs at eps = {list(censored_eps)}")
        self.censored_eps = list(censored_eps)


def fit_lifespan(eps, T, case: str = SUBCRITICAL, p: float = 2.0, q: float = 2.0) -> FitResult:
    """Least-squares fit of log T against the abscissa matching a lifespan case.

    subcritical: log eps; critical: eps^-(pq-1);
    doubly critical: eps^-min((pq-1)/(p+1), (pq-1)/(q+1)).
    """
    eps = np.asarray(eps, dtype=float)
    y = np.log(np.asarray(T, dtype=float))
    if case == SUBCRITICAL:
        x = np.log(eps)
    elif case == CRITICAL:
        x = eps ** (-(p * q - 1.0))
    elif case == DOUBLY_CRITICAL:
        x = eps ** (-min((p * q - 1.0) / (p + 1.0), (p * q - 1.0) / (q + 1.0)))
    else:
        raise ValueError(f"no lifespan law for case {case!r}")
    if eps.size < 2:
        raise ValueError("need at least two points to fit")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(case, float(slope), float(intercept), r2, int(eps.size), r2 < FIT_R2_FLAG)


def frame_sweep(template: FrameConfig, eps_list, eps_ref: float = 1.0) -> list[FrameResult]:
    """Integrate the frame for each eps; initial values scale as eps / eps_ref."""
    return [integrate_frame(template.replace(L1_0=template.L1_0 * e / eps_ref, L2_0=template.L2_0 * e / eps_ref))
            for e in eps_list]


def frame_exponent_fit(template: FrameConfig, eps_list, eps_ref: float = 1.0,
                       case: str = SUBCRITICAL, min_decades: float = 2.0) -> tuple[FitResult, list[FrameResult]]:
    """Fit the divergence times of a frame sweep; refuses sweeps with censored runs."""
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 4 or math.log10(max(eps_list) / min(eps_list)) < min_decades - 1e-9:
        raise ValueError(f"need >= 4 eps values spanning >= {min_decades:g} decades")
    results = frame_sweep(template, eps_list, eps_ref)
    censored = [e for e, r in zip(eps_list, results) if r.status != DIVERGED]
    if censored:
        raise FitRefused(censored)
    fit = fit_lifespan(eps_list, [r.T_div for r in results], case, template.p, template.q)
    return fit, results
