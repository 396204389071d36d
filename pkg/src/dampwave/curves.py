"""Exponent arithmetic: Glassey exponent, dimension shifts, critical curves.

The blow-up region of the coupled system is described by

    Lambda(D, p, q) = (p + 1)/(pq - 1) - (D - 1)/2,
    Omega = max(Lambda(N + s1, p, q), Lambda(N + s2, q, p)),

where the shifts s_i are either the damping coefficients mu_i themselves or
the older, larger shifts sigma(mu_i).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .params import ExponentPair, ModelParams

ZERO_RTOL = 1e-12

SUBCRITICAL = "subcritical_blowup"
CRITICAL = "critical_blowup"
DOUBLY_CRITICAL = "doubly_critical_blowup"
OUTSIDE = "outside_proved_region"


def glassey_exponent(N: int) -> float:
    """p_G(N) = 1 + 2/(N-1); ``math.inf`` for N = 1."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if N == 1:
        return math.inf
    return 1.0 + 2.0 / (N - 1)


def sigma_shift(mu: float) -> float:
    """Dimension shift 2mu on [0,1), 2 on [1,2), mu on [2, inf)."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if mu < 1:
        return 2.0 * mu
    if mu < 2:
        return 2.0
    return float(mu)


def lambda_curve(D: float, pq: ExponentPair) -> float:
    if not D > 0:
        raise ValueError("shifted dimension D must be positive")
    p, q = pq.p, pq.q
    return (p + 1.0) / (p * q - 1.0) - (D - 1.0) / 2.0


def _pair(p, q=None) -> ExponentPair:
    return p if isinstance(p, ExponentPair) else ExponentPair(p, q)


def omega_parts(N: int, shift1: float, shift2: float, pq: ExponentPair) -> tuple[float, float]:
    """(Lambda(N + shift1, p, q), Lambda(N + shift2, q, p))."""
    if shift1 < 0 or shift2 < 0:
        raise ValueError("shifts must be nonnegative")
    return lambda_curve(N + shift1, pq), lambda_curve(N + shift2, ExponentPair(pq.q, pq.p))


def omega(N: int, shift1: float, shift2: float, pq: ExponentPair) -> float:
    return max(omega_parts(N, shift1, shift2, pq))


def _is_zero(x: float, scale: float) -> bool:
    return abs(x) <= ZERO_RTOL * max(1.0, scale)


@dataclass(frozen=True)
class RegionClassification:
    lambda_pq: float
    lambda_qp: float
    omega_mu: float
    omega_sigma: float
    lambda_pq_sigma: float
    lambda_qp_sigma: float
    case_label: str
    lifespan_exponent: float | None
    lifespan_formula: str

    def to_dict(self) -> dict:
        return asdict(self)


def classify_exponents(N: int, mu1: float, mu2: float, p: float, q: float) -> RegionClassification:
    pq = ExponentPair(p, q)
    lam_pq, lam_qp = omega_parts(N, mu1, mu2, pq)
    sig_pq, sig_qp = omega_parts(N, sigma_shift(mu1), sigma_shift(mu2), pq)
    om = max(lam_pq, lam_qp)
    scale = (p + 1.0) / (p * q - 1.0) + (q + 1.0) / (p * q - 1.0) + N + mu1 + mu2
    z_pq, z_qp = _is_zero(lam_pq, scale), _is_zero(lam_qp, scale)
    if z_pq and z_qp:
        label = DOUBLY_CRITICAL
        expo = min((p * q - 1.0) / (p + 1.0), (p * q - 1.0) / (q + 1.0))
        formula = f"T <= exp(C eps^-{expo:.17g})"
    elif _is_zero(om, scale):
        label = CRITICAL
        expo = p * q - 1.0
        formula = f"T <= exp(C eps^-{expo:.17g})"
    elif om > 0:
        label = SUBCRITICAL
        expo = om
        formula = f"T <= C eps^-{expo:.17g}"
    else:
        label = OUTSIDE
        expo = None
        formula = "no blow-up bound"
    return RegionClassification(lam_pq, lam_qp, om, max(sig_pq, sig_qp), sig_pq, sig_qp, label, expo, formula)


def classify(params: ModelParams) -> RegionClassification:
    """Region and lifespan case of an instance; eps plays no role."""
    return classify_exponents(params.N, params.mu1.mu, params.mu2.mu, params.p, params.q)


def region_rows(N: int, mu1: float, mu2: float, p_values, q_values):
    """Yield (p, q, omega_mu, omega_sigma, lambda_pq, lambda_qp, case_label) over a grid."""
    for p in p_values:
        for q in q_values:
            c = classify_exponents(N, mu1, mu2, float(p), float(q))
            yield float(p), float(q), c.omega_mu, c.omega_sigma, c.lambda_pq, c.lambda_qp, c.case_label
