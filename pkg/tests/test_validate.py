"""Cross-engine validation report tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from besscap.errors import InputError
from besscap.series import EnergySeries, cumulate, excess_demand
from besscap.run_bounds import b_sharp_g, decompose
from besscap import validate as validate_mod
from besscap.validate import (
    CROSS_ENGINE_TOL,
    cross_engine_report,
    default_validation_grid,
)

from conftest import split_runs


def _pair(r):
    w, d = split_runs(np.asarray(r, dtype=np.float64))
    return (EnergySeries(w, 1.0, "wind"), EnergySeries(d, 1.0, "demand"))


def test_default_validation_grid():
    grid = default_validation_grid(6.0)
    assert grid.size == 17
    assert grid[0] == 0.0
    assert grid[-1] == pytest.approx(7.2)
    assert np.all(np.diff(grid) > 0)
    assert default_validation_grid(0.0).tolist() == [0.0]
    assert default_validation_grid(6.0, n=5).size == 5


def test_report_on_fixture(fixture_r):
    wind, demand = _pair(fixture_r)
    rep = cross_engine_report(wind, demand)
    assert rep["passed"] is True
    assert rep["max_rel_diff"] <= CROSS_ENGINE_TOL
    assert rep["tolerance"] == CROSS_ENGINE_TOL
    assert rep["retention"] == 1.0
    assert rep["n_steps"] == fixture_r.size
    assert len(rep["rows"]) == 17
    first = rep["rows"][0]
    assert first["b_mwh"] == 0.0
    # at B = 0 every engine returns the rectified excess demand
    assert first["lp_mwh"] == pytest.approx(15.0, abs=1e-9)
    assert first["greedy_mwh"] == pytest.approx(15.0, abs=1e-9)
    assert first["dp_mwh"] == pytest.approx(15.0, abs=1e-9)
    last = rep["rows"][-1]
    assert last["b_mwh"] == pytest.approx(7.2)
    assert last["dp_mwh"] == pytest.approx(0.0, abs=1e-12)
    for row in rep["rows"]:
        assert row["p_mw"] == pytest.approx(row["b_mwh"] / 1.0)
        assert row["max_rel_diff"] <= CROSS_ENGINE_TOL


def test_report_with_explicit_ladder(fixture_r):
    wind, demand = _pair(fixture_r)
    rep = cross_engine_report(wind, demand, b_values=[0.0, 5.0, 6.0, 8.0])
    dp = [row["dp_mwh"] for row in rep["rows"]]
    assert dp[0] == pytest.approx(15.0, abs=1e-12)
    assert dp[1] == pytest.approx(1.0, abs=1e-12)
    assert dp[2] == pytest.approx(0.0, abs=1e-12)
    assert dp[3] == pytest.approx(0.0, abs=1e-12)
    assert rep["passed"] is True


def test_report_fingerprint_matches(fixture_r):
    from besscap.capacity import data_fingerprint

    wind, demand = _pair(fixture_r)
    rep = cross_engine_report(wind, demand, b_values=[0.0])
    assert rep["fingerprint"] == data_fingerprint(wind, demand)


def test_report_detects_engine_disagreement(fixture_r, monkeypatch):
    wind, demand = _pair(fixture_r)
    monkeypatch.setattr(validate_mod, "dp_peaker_energy",
                        lambda dec, b: 123.0)
    rep = cross_engine_report(wind, demand, b_values=[0.0, 5.0])
    assert rep["passed"] is False
    assert rep["max_rel_diff"] > 0.9


def test_report_rejects_mismatched_series():
    wind = EnergySeries([1.0, 2.0], 1.0, "wind")
    demand = EnergySeries([1.0], 1.0, "demand")
    with pytest.raises(InputError):
        cross_engine_report(wind, demand)


@settings(max_examples=25)
@given(st.lists(st.integers(min_value=-5, max_value=5), min_size=2,
                max_size=30))
def test_report_passes_on_random_integer_data(ints):
    r = np.array(ints, dtype=np.float64)
    wind, demand = _pair(r)
    dec = decompose(cumulate(excess_demand(wind, demand)))
    ladder = default_validation_grid(b_sharp_g(dec), n=7)
    rep = cross_engine_report(wind, demand, b_values=ladder)
    assert rep["passed"] is True
