"""Mutual validation of the three routes to total peaker energy.

In the lossless, rate-inactive regime (retention 1, delta*P >= B) the
linear program, the greedy policy with an optimized initial state, and
the max-cost-path recursion must all produce the same total peaker
energy. This module runs all three over a ladder of capacities and
reports the worst relative discrepancy; anything above 1e-9 is a defect
in one of the engines, never an acceptable approximation.
"""

from __future__ import annotations

import numpy as np

from .alignment_lp import LpInstance, solve
from .bess_sim import BessSpec, greedy_simulate
from .capacity import data_fingerprint
from .errors import EngineError
from .run_bounds import b_sharp_g, decompose, dp_peaker_energy
from .series import EnergySeries, _check_pair, cumulate, excess_demand

CROSS_ENGINE_TOL = 1e-9


def default_validation_grid(b_sharp_g_value: float,
                            n: int = 17) -> np.ndarray:
    """Capacity ladder 0 .. 1.2 * b_sharp_g, endpoints included."""
    cap = 1.2 * float(b_sharp_g_value)
    if not cap > 0:
        return np.zeros(1)
    return np.linspace(0.0, cap, n)


def cross_engine_report(wind: EnergySeries, demand: EnergySeries,
                        b_values=None) -> dict:
    """Run LP, greedy, and the recursion over a capacity ladder.

    The comparison regime is pinned regardless of any configured
    retention: alpha = 1 and P = B/delta, where all three routes are
    exact. Relative differences use max(1, |a|, |b|) in the denominator.
    """
    _check_pair(wind, demand)
    delta = wind.delta
    r = excess_demand(wind, demand)
    dec = decompose(cumulate(r))
    if b_values is None:
        b_values = default_validation_grid(b_sharp_g(dec))
    rows = []
    worst = 0.0
    for b in np.asarray(b_values, dtype=np.float64):
        b = float(b)
        spec = BessSpec(b, b / delta, 1.0, delta)
        sol = solve(LpInstance(r, spec, "avg"))
        if sol.status != "optimal":
            raise EngineError(
                f"validation solve failed ({sol.status}) at B={b}")
        lp_tot = sol.total_g_mwh
        greedy_tot = greedy_simulate(wind, demand, spec).total_g_mwh
        dp_tot = dp_peaker_energy(dec, b)
        scale = max(1.0, abs(lp_tot), abs(greedy_tot), abs(dp_tot))
        rel = max(abs(lp_tot - greedy_tot), abs(lp_tot - dp_tot),
                  abs(greedy_tot - dp_tot)) / scale
        worst = max(worst, rel)
        rows.append({
            "b_mwh": b,
            "p_mw": b / delta,
            "lp_mwh": lp_tot,
            "greedy_mwh": greedy_tot,
            "dp_mwh": dp_tot,
            "max_rel_diff": rel,
        })
    return {
        "delta_hours": delta,
        "retention": 1.0,
        "n_steps": len(wind),
        "fingerprint": data_fingerprint(wind, demand),
        "tolerance": CROSS_ENGINE_TOL,
        "rows": rows,
        "max_rel_diff": worst,
        "passed": bool(worst <= CROSS_ENGINE_TOL),
    }
