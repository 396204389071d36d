import time

import pytest

from dampwave.params import GridConfig, ModelParams
from dampwave.solver import run_until_blowup

# eps values of the scaling study: 8e-3 * 2^-k, k = 0..5 (1.5 decades)
SWEEP_EPS = tuple(8e-3 * 2.0**-k for k in range(6))
SWEEP_HORIZON = 1500.0

_RUNS: dict = {}
ACCEPTANCE: dict = {}


def cached_run(eps: float, grid: GridConfig | None = None, horizon: float = SWEEP_HORIZON, **param_kw):
    """Solve once per (eps, grid, params) for the whole session; returns (outcome, seconds)."""
    grid = grid or GridConfig(horizon=SWEEP_HORIZON)
    params = ModelParams(eps=eps, **param_kw)
    key = (repr(params), repr(grid), horizon)
    if key not in _RUNS:
        t0 = time.perf_counter()
        out = run_until_blowup(params, horizon=horizon, grid=grid)
        _RUNS[key] = (out, time.perf_counter() - t0)
    return _RUNS[key]


@pytest.fixture(scope="session")
def default_run():
    return cached_run(1e-3)[0]


@pytest.fixture(scope="session")
def halved_run():
    return cached_run(5e-4)[0]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {msg}")
