"""Problem instance and run configuration."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .specfun import DampingProfile


class ConfigurationError(ValueError):
    """Inconsistent or invalid run configuration."""


class DataAdmissibilityError(ConfigurationError):
    """Initial data violate the sign hypotheses (negative profile, C(f, g) <= 0)."""


@dataclass(frozen=True)
class ExponentPair:
    p: float
    q: float

    def __post_init__(self):
        if not (self.p > 1 and self.q > 1):
            raise ConfigurationError(f"exponents must satisfy p, q > 1, got p={self.p}, q={self.q}")


# Default data amplitude; with R = 1 it puts the eps = 1e-3 lifespan of the
# N = 1, mu = 0.5, p = q = 2 instance at t ~ 10^2.
DEFAULT_AMPLITUDE = 100.0


@dataclass(frozen=True)
class ModelParams:
    """Full problem instance (N, mu1, mu2, p, q, R, eps, data amplitudes)."""

    N: int = 1
    mu1: DampingProfile = field(default_factory=lambda: DampingProfile(0.5))
    mu2: DampingProfile = field(default_factory=lambda: DampingProfile(0.5))
    p: float = 2.0
    q: float = 2.0
    R: float = 1.0
    eps: float = 1e-3
    nonlinearity_on: bool = True
    # bump amplitudes of (f1, f2, g1, g2)
    amplitudes: tuple[float, float, float, float] = (DEFAULT_AMPLITUDE,) * 4

    def __post_init__(self):
        if isinstance(self.mu1, (int, float)):
            object.__setattr__(self, "mu1", DampingProfile(float(self.mu1)))
        if isinstance(self.mu2, (int, float)):
            object.__setattr__(self, "mu2", DampingProfile(float(self.mu2)))
        if int(self.N) != self.N or self.N < 1:
            raise ConfigurationError("N must be a positive integer")
        ExponentPair(self.p, self.q)
        if not self.R > 0:
            raise ConfigurationError("R must be positive")
        if not self.eps >= 0:
            raise ConfigurationError("eps must be nonnegative")
        if len(self.amplitudes) != 4 or any(a < 0 for a in self.amplitudes):
            raise ConfigurationError("amplitudes must be four nonnegative numbers")

    @property
    def exponents(self) -> ExponentPair:
        return ExponentPair(self.p, self.q)

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = {
            "N": self.N,
            "mu1": self.mu1.mu,
            "mu2": self.mu2.mu,
            "p": self.p,
            "q": self.q,
            "R": self.R,
            "eps": self.eps,
            "nonlinearity_on": self.nonlinearity_on,
            "amplitudes": list(self.amplitudes),
        }
        for key, prof in (("delta1", self.mu1), ("delta2", self.mu2)):
            if prof.perturbation is not None:
                d[key] = {"times": prof.perturbation[0].tolist(), "values": prof.perturbation[1].tolist()}
        return d


@dataclass(frozen=True)
class GridConfig:
    """Discretization and stopping controls of a solver run."""

    h: float = 1.0 / 64.0
    horizon: float = 50.0
    cfl: float = 0.5
    blowup_threshold: float = 1e6
    dt_min: float = 1e-13
    sampling_dt: float = 0.05
    # cells kept beyond the light cone in the active window
    pad_cells: int = 64
    # nonlinear step control: dt * growth rate <= nl_safety
    nl_safety: float = 0.05

    def __post_init__(self):
        if not self.h > 0 or not self.horizon > 0:
            raise ConfigurationError("h and horizon must be positive")
        if not 0 < self.cfl <= 1:
            raise ConfigurationError("cfl must lie in (0, 1]")
        if not self.sampling_dt > 0:
            raise ConfigurationError("sampling_dt must be positive")


_FLOAT_KEYS = {"mu1", "mu2", "p", "q", "R", "eps", "h", "horizon", "blowup_threshold",
               "sampling_dt", "cfl", "dt_min", "nl_safety", "amplitude", "C1", "C6", "T2"}
_LIST_KEYS = {"amplitudes", "delta1_times", "delta1_values", "delta2_times", "delta2_values",
              "eps_list", "p_range", "q_range"}
_INT_KEYS = {"N", "pad_cells", "jobs"}
_BOOL_KEYS = {"nonlinearity"}
KNOWN_KEYS = _FLOAT_KEYS | _LIST_KEYS | _INT_KEYS | _BOOL_KEYS
_GRID_FIELDS = {f.name for f in dataclasses.fields(GridConfig)}


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, value = (s.strip() for s in line.split("=", 1))
        else:
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ConfigurationError(f"line {lineno}: expected 'key = value'")
            key, value = parts
        try:
            if key in _LIST_KEYS:
                out[key] = [float(x) for x in value.replace(",", " ").split()]
            elif key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key in _INT_KEYS:
                out[key] = int(value)
            elif key in _BOOL_KEYS:
                out[key] = value.lower() in {"1", "true", "on", "yes"}
            else:
                raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            raise ConfigurationError(f"line {lineno}: bad value for {key!r}: {value!r}") from exc
    return out


def params_from_mapping(cfg: dict) -> tuple[ModelParams, GridConfig]:
    def profile(i: int) -> DampingProfile:
        mu = cfg.get(f"mu{i}", 0.5)
        times, values = cfg.get(f"delta{i}_times"), cfg.get(f"delta{i}_values")
        if (times is None) != (values is None):
            raise ConfigurationError(f"delta{i}_times and delta{i}_values must be given together")
        pert = None if times is None else (np.array(times), np.array(values))
        try:
            return DampingProfile(mu, pert)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    if "amplitudes" in cfg:
        amps = tuple(cfg["amplitudes"])
    else:
        amps = (cfg.get("amplitude", DEFAULT_AMPLITUDE),) * 4
    params = ModelParams(
        N=cfg.get("N", 1), mu1=profile(1), mu2=profile(2), p=cfg.get("p", 2.0), q=cfg.get("q", 2.0),
        R=cfg.get("R", 1.0), eps=cfg.get("eps", 1e-3), nonlinearity_on=cfg.get("nonlinearity", True),
        amplitudes=amps,
    )
    grid = GridConfig(**{k: v for k, v in cfg.items() if k in _GRID_FIELDS})
    return params, grid


def load_config(path) -> tuple[ModelParams, GridConfig]:
    return params_from_mapping(parse_config_text(Path(path).read_text()))


def config_hash(params: ModelParams, grid: GridConfig) -> str:
    blob = json.dumps({"params": params.to_dict(), "grid": dataclasses.asdict(grid)}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
