"""Instance container, serialization, debug dump, and the memo cache."""

from __future__ import annotations

import numpy as np
import pytest

import besscap.alignment_lp as mod
from besscap.alignment_lp import (
    LpInstance,
    LpSolution,
    build_instance,
    clear_alignment_cache,
    power_alignment,
    solve,
)
from besscap.bess_sim import BessSpec
from besscap.errors import EngineError, InputError
from besscap.series import EnergySeries

from conftest import split_runs


def _pair(r, delta=1.0):
    w, d = split_runs(np.asarray(r, dtype=np.float64))
    return (EnergySeries(w, delta, "wind"),
            EnergySeries(d, delta, "demand"))


def _inst(r=(1.0, -2.0, 3.0), objective="avg", b=2.0, p=1.0, alpha=0.9):
    wind, demand = _pair(np.asarray(r))
    return build_instance(wind, demand, BessSpec(b, p, alpha, 1.0),
                          objective)


def test_counts_by_objective():
    inst = _inst(objective="avg")
    assert len(inst) == 3
    assert inst.num_variables == 10
    assert inst.num_equalities == 3
    assert inst.num_rate_rows == 6
    peak = _inst(objective="peak")
    assert peak.num_variables == 11


def test_build_instance_signed_r(fixture_r):
    wind, demand = _pair(fixture_r)
    inst = build_instance(wind, demand, BessSpec(1.0, 1.0), "avg")
    np.testing.assert_allclose(inst.r, fixture_r)
    assert not inst.r.flags.writeable


def test_objective_alias_normalized():
    assert _inst(objective="average").objective == "avg"
    with pytest.raises(InputError):
        _inst(objective="p95")


def test_rejects_bad_r():
    with pytest.raises(InputError):
        LpInstance(np.array([]), BessSpec(1.0, 1.0), "avg")
    with pytest.raises(InputError):
        LpInstance(np.array([1.0, np.inf]), BessSpec(1.0, 1.0), "avg")


def test_dict_and_json_roundtrip():
    inst = _inst(objective="peak", alpha=0.77)
    back = LpInstance.from_json(inst.to_json())
    np.testing.assert_array_equal(back.r, inst.r)
    assert back.spec == inst.spec
    assert back.objective == "peak"
    with pytest.raises(InputError):
        LpInstance.from_dict({"r": [1.0]})


def test_debug_text_is_mps_shaped():
    text = _inst(objective="peak").to_debug_text()
    for marker in ("NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"):
        assert marker in text
    assert " E  C1" in text
    assert " L  U1" in text and " G  D1" in text and " L  P1" in text
    assert " T " in text
    avg_text = _inst(objective="avg").to_debug_text()
    assert " L  P1" not in avg_text


def test_solution_total_energy(fixture_r):
    wind, demand = _pair(fixture_r)
    spec = BessSpec(4.0, 2.0, 1.0, 1.0)
    sol = solve(build_instance(wind, demand, spec, "avg"))
    assert isinstance(sol, LpSolution)
    assert sol.total_g_mwh == pytest.approx(
        sol.objective_value * len(fixture_r), rel=1e-12)


def test_power_alignment_matches_solve(fixture_r):
    wind, demand = _pair(fixture_r)
    spec = BessSpec(3.0, 1.5, 1.0, 1.0)
    clear_alignment_cache()
    direct = solve(build_instance(wind, demand, spec, "avg"))
    assert power_alignment(wind, demand, spec, "avg") == pytest.approx(
        direct.objective_value, rel=1e-15)


def test_power_alignment_memoizes(fixture_r, monkeypatch):
    wind, demand = _pair(fixture_r)
    spec = BessSpec(2.0, 1.0, 1.0, 1.0)
    clear_alignment_cache()
    calls = {"n": 0}
    real = mod.solve

    def counting(instance):
        calls["n"] += 1
        return real(instance)

    monkeypatch.setattr(mod, "solve", counting)
    first = power_alignment(wind, demand, spec, "avg")
    second = power_alignment(wind, demand, spec, "avg")
    assert first == second
    assert calls["n"] == 1
    power_alignment(wind, demand, spec, "peak")
    assert calls["n"] == 2
    clear_alignment_cache()
    power_alignment(wind, demand, spec, "avg")
    assert calls["n"] == 3


def test_power_alignment_cache_distinguishes_specs(fixture_r):
    wind, demand = _pair(fixture_r)
    clear_alignment_cache()
    small = power_alignment(wind, demand, BessSpec(1.0, 1.0), "avg")
    large = power_alignment(wind, demand, BessSpec(8.0, 8.0), "avg")
    assert large < small


def test_power_alignment_surfaces_engine_failure(fixture_r, monkeypatch):
    wind, demand = _pair(fixture_r)
    clear_alignment_cache()

    def broken(instance):
        return LpSolution(objective_value=0.0, schedule=None,
                          status="numeric_failure", iterations=3)

    monkeypatch.setattr(mod, "solve", broken)
    with pytest.raises(EngineError):
        power_alignment(wind, demand, BessSpec(1.0, 1.0), "avg")
    clear_alignment_cache()


def test_rate_limit_inactive_above_b_over_delta():
    # once P covers a full charge or drain per step, raising it further
    # cannot change the optimum
    rng = np.random.default_rng(7)
    for _ in range(12):
        n = int(rng.integers(3, 12))
        r = rng.integers(-4, 5, size=n).astype(np.float64)
        wind, demand = _pair(r)
        for alpha in (1.0, 0.9):
            for objective in ("avg", "peak"):
                b = float(rng.uniform(0.5, 5.0))
                base = power_alignment(
                    wind, demand, BessSpec(b, b, alpha, 1.0), objective)
                for scale in (2.0, 10.0):
                    more = power_alignment(
                        wind, demand,
                        BessSpec(b, b * scale, alpha, 1.0), objective)
                    assert more == pytest.approx(base, abs=1e-12)


def test_balanced_pair_needs_no_peaker():
    rng = np.random.default_rng(11)
    for _ in range(10):
        n = int(rng.integers(2, 10))
        w = rng.uniform(0.0, 5.0, size=n)
        wind = EnergySeries(w, 1.0, "wind")
        demand = EnergySeries(w.copy(), 1.0, "demand")
        for objective in ("avg", "peak"):
            value = power_alignment(
                wind, demand, BessSpec(0.0, 0.0, 1.0, 1.0), objective)
            assert value == 0.0
