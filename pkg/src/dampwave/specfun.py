"""Closed-form objects behind the test-function method.

Everything here is a pure function of its arguments and an immutable
:class:`QuadratureConfig`.  The modified Bessel function of the second kind
is evaluated from its integral representation

    K_nu(t) = int_0^inf exp(-t cosh z) cosh(nu z) dz

with composite Gauss-Legendre panels in z.  Internally the integrand is
scaled by exp(t) so that large arguments do not underflow; the ``*_scaled``
helpers expose that form to callers that combine exponentials themselves
(the PDE functionals work with exp(r - t) weights on large grids).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gamma as _gamma_fn

__all__ = [
    "AccuracyError",
    "DampingProfile",
    "QuadratureConfig",
    "DEFAULT_CONFIG",
    "modified_bessel_k",
    "bessel_k_scaled",
    "phi_radial",
    "phi_radial_scaled",
    "sphere_area",
    "rho",
    "rho_scaled",
    "rho_log_deriv",
    "gamma_coeff",
    "psi",
    "multiplier_m",
]


class AccuracyError(ArithmeticError):
    """Quadrature could not reach the requested tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (estimated residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class QuadratureConfig:
    """Quadrature settings shared by the Bessel and sphere integrals.

    ``truncation_bound`` is an upper cap for the z-interval; the bound actually
    used is solved per argument so the neglected tail is below ``tolerance``
    relative to the peak of the integrand.
    """

    node_count: int = 256
    truncation_bound: float = 40.0
    angular_nodes: int = 256
    tolerance: float = 1e-10
    panels: int = 2

    def __post_init__(self):
        if self.node_count < 16:
            raise ValueError("node_count must be >= 16")
        if self.angular_nodes < 16:
            raise ValueError("angular_nodes must be >= 16")
        if not self.truncation_bound > 0:
            raise ValueError("truncation_bound must be positive")
        if not 0 < self.tolerance < 1:
            raise ValueError("tolerance must lie in (0, 1)")
        if self.panels < 1:
            raise ValueError("panels must be >= 1")


DEFAULT_CONFIG = QuadratureConfig()


@dataclass(frozen=True)
class DampingProfile:
    """Damping coefficient b(t) = mu/(1+t) + delta(t).

    ``perturbation`` is an optional table ``(times, values)``; delta is linearly
    interpolated on the table and zero outside it, so its integral over
    (0, inf) is the trapezoid integral of the table.
    """

    mu: float
    perturbation: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("damping coefficient mu must be nonnegative")
        if self.perturbation is not None:
            times, values = (np.asarray(a, dtype=float) for a in self.perturbation)
            if times.ndim != 1 or times.shape != values.shape or times.size < 2:
                raise ValueError("perturbation table must be two equal-length 1-D arrays")
            if np.any(np.diff(times) <= 0):
                raise ValueError("perturbation times must be strictly increasing")
            if not np.all(np.isfinite(values)) or not np.isfinite(np.trapezoid(np.abs(values), times)):
                raise ValueError("perturbation must have a finite integral")
            object.__setattr__(self, "perturbation", (times, values))

    def __call__(self, t):
        b = self.mu / (1.0 + np.asarray(t, dtype=float))
        if self.perturbation is not None:
            times, values = self.perturbation
            b = b + np.interp(t, times, values, left=0.0, right=0.0)
        return b

    def perturbation_integral(self) -> float:
        if self.perturbation is None:
            return 0.0
        times, values = self.perturbation
        return float(np.trapezoid(values, times))


@lru_cache(maxsize=32)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _truncation(nu: float, t: float, cfg: QuadratureConfig) -> float:
    # tail of exp(-t(cosh z - 1) + |nu| z) below tolerance, solved by fixed point
    log_tol = math.log(1.0 / cfg.tolerance) + 5.0
    a = abs(nu)
    b = math.acosh(1.0 + log_tol / t)
    for _ in range(60):
        b_new = math.acosh(1.0 + (log_tol + a * b) / t)
        if abs(b_new - b) < 1e-12:
            break
        b = b_new
    return min(b_new, cfg.truncation_bound)


def _panel_rule(upper: float, n: int, panels: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _gauss_legendre(n)
    edges = np.linspace(0.0, upper, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _k_scaled_scalar(nu: float, t: float, cfg: QuadratureConfig) -> float:
    upper = _truncation(nu, t, cfg)
    z, w = _panel_rule(upper, cfg.node_count, cfg.panels)
    # exp(-t(cosh z - 1)) written with expm1-free form; cosh z - 1 = 2 sinh^2(z/2)
    integrand = np.exp(-2.0 * t * np.sinh(0.5 * z) ** 2) * np.cosh(nu * z)
    value = float(np.dot(w, integrand))
    zc, wc = _panel_rule(upper, cfg.node_count // 2, cfg.panels)
    coarse = float(np.dot(wc, np.exp(-2.0 * t * np.sinh(0.5 * zc) ** 2) * np.cosh(nu * zc)))
    residual = abs(value - coarse) / abs(value)
    if residual > cfg.tolerance:
        raise AccuracyError(f"K_{nu}({t}) did not converge with {cfg.node_count} nodes", residual)
    return value


def bessel_k_scaled(nu, t, cfg: QuadratureConfig = DEFAULT_CONFIG):
    """Return exp(t) * K_nu(t); broadcasts over array ``t``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0)):
        raise ValueError("K_nu(t) requires t > 0")
    nu = float(nu)
    if t_arr.ndim == 0:
        return _k_scaled_scalar(nu, float(t_arr), cfg)
    out = np.empty_like(t_arr)
    for idx, tv in np.ndenumerate(t_arr):
        out[idx] = _k_scaled_scalar(nu, float(tv), cfg)
    return out


def modified_bessel_k(nu, t, cfg: QuadratureConfig = DEFAULT_CONFIG):
    """Modified Bessel function of the second kind K_nu(t) for real nu, t > 0."""
    return bessel_k_scaled(nu, t, cfg) * np.exp(-np.asarray(t, dtype=float))


def sphere_area(k: int) -> float:
    """Surface measure of the unit sphere S^k in R^{k+1}; |S^0| = 2."""
    return 2.0 * math.pi ** ((k + 1) / 2.0) / _gamma_fn((k + 1) / 2.0)


def phi_radial_scaled(N: int, r, cfg: QuadratureConfig = DEFAULT_CONFIG):
    """Return exp(-|r|) * phi(r) with phi the exponential sphere average."""
    if N < 1:
        raise ValueError("dimension N must be >= 1")
    r_arr = np.abs(np.asarray(r, dtype=float))
    if N == 1:
        return 1.0 + np.exp(-2.0 * r_arr)
    x, w = _gauss_legendre(cfg.angular_nodes)
    theta = 0.5 * math.pi * (x + 1.0)
    weights = 0.5 * math.pi * w * np.sin(theta) ** (N - 2)
    # exp(r cos(theta) - r) = exp(-2 r sin^2(theta/2))
    expo = np.exp(-2.0 * np.multiply.outer(r_arr, np.sin(0.5 * theta) ** 2))
    return sphere_area(N - 2) * (expo @ weights)


def phi_radial(N: int, r, cfg: QuadratureConfig = DEFAULT_CONFIG):
    """phi(x) = int_{S^{N-1}} exp(x . omega) d omega at |x| = r (exp(x)+exp(-x) for N = 1)."""
    return phi_radial_scaled(N, r, cfg) * np.exp(np.abs(np.asarray(r, dtype=float)))


def _check_mu_t(mu, t):
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr >= 0)):
        raise ValueError("rho requires t >= 0")
    return t_arr


def rho_scaled(mu: float, t, cfg: QuadratureConfig = DEFAULT_CONFIG):
    """Return rho(t) * exp(t + 1)."""
    t_arr = _check_mu_t(mu, t)
    s = t_arr + 1.0
    return s ** ((mu + 1.0) / 2.0) * bessel_k_scaled((mu - 1.0) / 2.0, s, cfg)


def rho(mu: float, t, cfg: QuadratureConfig = DEFAULT_CONFIG):
    """Time factor rho(t) = (t+1)^((mu+1)/2) K_{(mu-1)/2}(t+1) of the test function.

    ``mu = 0`` is accepted: K_{-1/2} = K_{1/2} gives rho = sqrt(pi/2) exp(-t-1),
    the pure exponential weighting of the undamped problem.
    """
    t_arr = _check_mu_t(mu, t)
    return rho_scaled(mu, t_arr, cfg) * np.exp(-(t_arr + 1.0))


def rho_log_deriv(mu: float, t, cfg: QuadratureConfig = DEFAULT_CONFIG):
    """rho'/rho = mu/(1+t) - K_{(mu+1)/2}(t+1) / K_{(mu-1)/2}(t+1)."""
    t_arr = _check_mu_t(mu, t)
    s = t_arr + 1.0
    ratio = bessel_k_scaled((mu + 1.0) / 2.0, s, cfg) / bessel_k_scaled((mu - 1.0) / 2.0, s, cfg)
    return mu / s - ratio


def gamma_coeff(mu: float, t, cfg: QuadratureConfig = DEFAULT_CONFIG):
    """Gamma(t) = mu/(1+t) - 2 rho'(t)/rho(t)."""
    t_arr = _check_mu_t(mu, t)
    return mu / (1.0 + t_arr) - 2.0 * rho_log_deriv(mu, t_arr, cfg)


def psi(mu: float, N: int, r, t, cfg: QuadratureConfig = DEFAULT_CONFIG):
    """Test function psi(x, t) = rho(t) phi(x) at |x| = r; r and t broadcast."""
    r_arr, t_arr = np.broadcast_arrays(np.abs(np.asarray(r, dtype=float)), _check_mu_t(mu, t))
    return phi_radial_scaled(N, r_arr, cfg) * rho_scaled(mu, t_arr, cfg) * np.exp(r_arr - t_arr - 1.0)


def multiplier_m(mu: float, t):
    """Multiplier m(t) = (1+t)^mu."""
    return (1.0 + np.asarray(t, dtype=float)) ** mu
