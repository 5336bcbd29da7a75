"""Shared fixtures: hypothesis profile and one-time kernel warmup."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow,
                           HealthCheck.filter_too_much],
)
settings.load_profile("ci")


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile every JIT kernel once so timed tests measure work, not JIT."""
    from besscap import _kernels as k

    r = np.array([1.0, 1.0, -1.0, 2.0, -2.0, -1.0])
    w = np.where(r > 0, r, 0.0)
    d = np.where(r < 0, -r, 0.0)
    k.greedy_fold(w, d, 1.0, 1.0, 1.0, 1.0, 0.0)
    k.greedy_totals(w, d, 1.0, 1.0, 1.0, 1.0, 0.0)
    R = np.concatenate([np.zeros(1), np.cumsum(r)])
    mins, maxs = k.extrema_kernel(R)
    k.dp_nodes(R, mins, maxs, 1.0, 0.0)
    k.dp_total(R, mins, maxs, 1.0, 0.0)
    k.kahan_cumsum(r)
    k.kahan_cumsum_pos(r)
    k.kahan_total(r)
    k.solve_alignment(r, 1.0, 1.0, 1.0, 1.0, k.OBJ_AVG)
    k.solve_alignment(r, 1.0, 1.0, 1.0, 1.0, k.OBJ_PEAK)
    k.cross_engine_sweep(r, 1.0)
    k.exhaustive_dp_lp(2, 2)
    return k


@pytest.fixture()
def fixture_r() -> np.ndarray:
    """The worked sizing example: four ascents and three descents."""
    parts = [1.0] * 4 + [-1.0] * 8 + [1.0] * 5 + [-1.0] * 5 + [1.0] * 6 \
        + [-1.0] * 2
    return np.asarray(parts, dtype=np.float64)


def split_runs(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Wind/demand pair whose excess demand d - w equals r."""
    r = np.asarray(r, dtype=np.float64)
    return np.where(r < 0, -r, 0.0), np.where(r > 0, r, 0.0)
