"""LP engine checked against an independent solver (scipy HiGHS).

The in-house simplex is the production route; scipy appears only here,
as a test oracle, so the two routes stay independent.
"""

from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import linprog

from besscap.alignment_lp import build_instance, solve
from besscap.bess_sim import BessSpec
from besscap.series import EnergySeries

from conftest import split_runs


def _pair(r, delta=1.0):
    w, d = split_runs(np.asarray(r, dtype=np.float64))
    return (EnergySeries(w, delta, "wind"),
            EnergySeries(d, delta, "demand"))


def scipy_alignment(r, b, p, alpha, delta, objective) -> float:
    """Reference LP: states x0..xN, flows g/l per step, optional peak t."""
    r = np.asarray(r, dtype=np.float64)
    n = r.size
    peak = objective == "peak"
    nx = n + 1
    nvar = nx + 2 * n + (1 if peak else 0)
    ix = lambda k: k
    ig = lambda k: nx + k
    il = lambda k: nx + n + k
    it = nvar - 1

    a_eq = np.zeros((n, nvar))
    b_eq = np.zeros(n)
    for k in range(n):
        a_eq[k, ix(k + 1)] = 1.0
        a_eq[k, ix(k)] = -alpha
        a_eq[k, ig(k)] = -1.0
        a_eq[k, il(k)] = 1.0
        b_eq[k] = -r[k]

    rows = []
    rhs = []
    cap = delta * p
    for k in range(n):
        up = np.zeros(nvar)
        up[ix(k + 1)] = 1.0
        up[ix(k)] = -alpha
        rows.append(up)
        rhs.append(cap)
        dn = -up
        rows.append(dn)
        rhs.append(cap)
    if peak:
        for k in range(n):
            pk = np.zeros(nvar)
            pk[ig(k)] = 1.0
            pk[it] = -1.0
            rows.append(pk)
            rhs.append(0.0)

    c = np.zeros(nvar)
    if peak:
        c[it] = 1.0 / delta
    else:
        c[ig(0):ig(0) + n] = 1.0 / (n * delta)

    bounds = [(0.0, b)] * nx + [(0.0, None)] * (2 * n)
    if peak:
        bounds.append((0.0, None))
    res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs),
                  A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    assert res.status == 0, res.message
    return float(res.fun)


def test_hand_instance_zero_battery(fixture_r):
    wind, demand = _pair(fixture_r)
    sol = solve(build_instance(wind, demand, BessSpec(0.0, 0.0), "avg"))
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(15.0 / 30.0, rel=1e-12)
    sol = solve(build_instance(wind, demand, BessSpec(0.0, 0.0), "peak"))
    assert sol.objective_value == pytest.approx(1.0, rel=1e-12)


def test_hand_instance_full_battery(fixture_r):
    wind, demand = _pair(fixture_r)
    sol = solve(build_instance(wind, demand, BessSpec(8.0, 8.0), "avg"))
    assert sol.objective_value == pytest.approx(0.0, abs=1e-12)


def test_solution_schedule_is_feasible(fixture_r):
    wind, demand = _pair(fixture_r)
    spec = BessSpec(3.0, 1.0, 0.95, 1.0)
    sol = solve(build_instance(wind, demand, spec, "avg"))
    sol.schedule.validate(wind, demand)
    assert sol.total_g_mwh == pytest.approx(
        sol.objective_value * len(fixture_r) * 1.0, rel=1e-9)


def test_deterministic_resolve(fixture_r):
    wind, demand = _pair(fixture_r)
    spec = BessSpec(2.5, 0.75, 0.9, 1.0)
    a = solve(build_instance(wind, demand, spec, "avg"))
    b = solve(build_instance(wind, demand, spec, "avg"))
    assert a.objective_value == b.objective_value
    assert a.iterations == b.iterations
    np.testing.assert_array_equal(a.schedule.x, b.schedule.x)


@pytest.mark.parametrize("objective", ["avg", "peak"])
def test_against_scipy_random(objective):
    rng = np.random.default_rng(20240817)
    for trial in range(40):
        n = int(rng.integers(1, 14))
        r = rng.integers(-5, 6, size=n).astype(float)
        if trial % 3 == 0:
            r += rng.random(n).round(2) - 0.5
        b = float(rng.choice([0.0, 1.0, 2.5, 6.0]))
        p = float(rng.choice([0.25, 1.0, 3.0, 10.0]))
        alpha = float(rng.choice([1.0, 0.95, 0.6]))
        delta = float(rng.choice([1.0, 0.25]))
        wind, demand = _pair(r, delta)
        spec = BessSpec(b, p, alpha, delta)
        sol = solve(build_instance(wind, demand, spec, objective))
        assert sol.status == "optimal"
        want = scipy_alignment(r, b, p, alpha, delta, objective)
        assert sol.objective_value == pytest.approx(
            want, rel=1e-7, abs=1e-7), (
            f"trial {trial}: n={n} B={b} P={p} alpha={alpha} "
            f"delta={delta} r={r.tolist()}")


def test_against_scipy_zero_rate():
    # P = 0 freezes the state; the peaker covers every deficit
    r = np.array([2.0, -1.0, 3.0, -4.0, 1.0])
    wind, demand = _pair(r)
    spec = BessSpec(5.0, 0.0, 1.0, 1.0)
    sol = solve(build_instance(wind, demand, spec, "avg"))
    want = scipy_alignment(r, 5.0, 0.0, 1.0, 1.0, "avg")
    assert sol.objective_value == pytest.approx(want, rel=1e-9, abs=1e-9)
    assert sol.objective_value == pytest.approx(6.0 / 5.0, rel=1e-9)


def test_against_scipy_zero_retention():
    # alpha = 0: the battery forgets its charge every step
    rng = np.random.default_rng(7)
    for _ in range(10):
        n = int(rng.integers(2, 10))
        r = rng.integers(-4, 5, size=n).astype(float)
        wind, demand = _pair(r)
        spec = BessSpec(3.0, 2.0, 0.0, 1.0)
        sol = solve(build_instance(wind, demand, spec, "avg"))
        want = scipy_alignment(r, 3.0, 2.0, 0.0, 1.0, "avg")
        assert sol.objective_value == pytest.approx(want, rel=1e-8,
                                                    abs=1e-9)
