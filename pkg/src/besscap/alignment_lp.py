"""Exact minimization of peaker power by linear programming.

The decision variables are the battery trajectory x(0..N) and the
nonnegative peaker and spill energies g(1..N), l(1..N); the peak
objective adds one auxiliary step-energy bound t. The constraints are
the conservation equalities, the state box [0, B], and the rate window
|x(n) - alpha*x(n-1)| <= delta*P. The solver is an in-house dense
bounded-variable primal simplex with deterministic pivoting (largest
violation, lowest index on ties, with an anti-cycling fallback), so
identical inputs give identical solutions on any platform.
"""

from __future__ import annotations

import hashlib
import json
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .bess_sim import BessSpec, DispatchSchedule, normalize_objective
from .errors import EngineError, InputError
from .series import EnergySeries, _check_pair

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_NUMERIC = "numeric_failure"

_STATUS_BY_CODE = {
    _kernels.OPTIMAL: STATUS_OPTIMAL,
    _kernels.ITER_CAP: STATUS_NUMERIC,
    _kernels.NUMERIC: STATUS_NUMERIC,
}


@dataclass(frozen=True)
class LpInstance:
    """One alignment problem: excess demand, battery ratings, objective.

    Attributes:
        r: signed excess demand d - w per step, MWh.
        spec: battery ratings, including the step length.
        objective: "avg" or "peak".
    """

    r: np.ndarray
    spec: BessSpec
    objective: str

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.r, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise InputError("r must be a nonempty one-dimensional array")
        if not np.all(np.isfinite(arr)):
            raise InputError("r contains non-finite values")
        arr.flags.writeable = False
        object.__setattr__(self, "r", arr)
        object.__setattr__(self, "objective",
                           normalize_objective(self.objective))

    def __len__(self) -> int:
        return int(self.r.size)

    @property
    def num_variables(self) -> int:
        """x(0..N), g(1..N), l(1..N), plus t for the peak objective."""
        n = len(self)
        return 3 * n + 1 + (1 if self.objective == "peak" else 0)

    @property
    def num_equalities(self) -> int:
        return len(self)

    @property
    def num_rate_rows(self) -> int:
        return 2 * len(self)

    def to_dict(self) -> dict:
        return {
            "r": [float(v) for v in self.r],
            "spec": {
                "energy_mwh": self.spec.energy_mwh,
                "power_mw": self.spec.power_mw,
                "retention": self.spec.retention,
                "delta": self.spec.delta,
            },
            "objective": self.objective,
        }

    @staticmethod
    def from_dict(doc: dict) -> "LpInstance":
        try:
            spec = BessSpec(**doc["spec"])
            return LpInstance(np.asarray(doc["r"], dtype=np.float64), spec,
                              doc["objective"])
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed instance document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "LpInstance":
        return LpInstance.from_dict(json.loads(text))

    def to_debug_text(self) -> str:
        """Fixed-column dump of the program for external cross-checks.

        Classic eight-character MPS layout: row names in ROWS, one
        COLUMNS entry per nonzero, RHS, and BOUNDS. Rows are C{n} for
        the conservation equalities, U{n}/D{n} for the upper and lower
        rate limits, and P{n} for the per-step bounds of the peak
        objective; columns are X{n}, G{n}, L{n} and T. The objective is
        in MW: each g carries 1/(N*delta) under "avg", t carries
        1/delta under "peak".
        """
        n = len(self)
        spec = self.spec
        peak = self.objective == "peak"

        def num(v: float) -> str:
            return f"{v:.12g}"

        def entry(col: str, row: str, val: float) -> str:
            return f"    {col:<8}  {row:<8}  {num(val):<12}"

        lines = [f"NAME{'':10}ALIGNLP", "ROWS", " N  COST"]
        for k in range(1, n + 1):
            lines.append(f" E  C{k}")
        for k in range(1, n + 1):
            lines.append(f" L  U{k}")
            lines.append(f" G  D{k}")
        if peak:
            for k in range(1, n + 1):
                lines.append(f" L  P{k}")
        lines.append("COLUMNS")
        a = spec.retention
        for k in range(n + 1):
            col = f"X{k}"
            if k >= 1:
                lines.append(entry(col, f"C{k}", 1.0))
                lines.append(entry(col, f"U{k}", 1.0))
                lines.append(entry(col, f"D{k}", 1.0))
            if k < n:
                lines.append(entry(col, f"C{k + 1}", -a))
                lines.append(entry(col, f"U{k + 1}", -a))
                lines.append(entry(col, f"D{k + 1}", -a))
        gcost = 1.0 / (n * spec.delta)
        for k in range(1, n + 1):
            col = f"G{k}"
            if not peak:
                lines.append(entry(col, "COST", gcost))
            lines.append(entry(col, f"C{k}", -1.0))
            if peak:
                lines.append(entry(col, f"P{k}", 1.0))
        for k in range(1, n + 1):
            lines.append(entry(f"L{k}", f"C{k}", 1.0))
        if peak:
            lines.append(entry("T", "COST", 1.0 / spec.delta))
            for k in range(1, n + 1):
                lines.append(entry("T", f"P{k}", -1.0))
        lines.append("RHS")
        cap = spec.step_throughput_mwh
        for k in range(1, n + 1):
            lines.append(entry("RHS", f"C{k}", -float(self.r[k - 1])))
            lines.append(entry("RHS", f"U{k}", cap))
            lines.append(entry("RHS", f"D{k}", -cap))
        lines.append("BOUNDS")
        for k in range(n + 1):
            lines.append(f" UP BND       X{k:<7}  {num(spec.energy_mwh):<12}")
        lines.append("ENDATA")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class LpSolution:
    """Solver outcome: certified value in MW plus the optimal dispatch."""

    objective_value: float
    schedule: DispatchSchedule
    status: str
    iterations: int

    @property
    def total_g_mwh(self) -> float:
        return self.schedule.total_g_mwh


def build_instance(wind: EnergySeries, demand: EnergySeries, spec: BessSpec,
                   objective: str = "avg") -> LpInstance:
    """Assemble the program for a wind/demand pair and battery ratings."""
    _check_pair(wind, demand)
    if wind.delta != spec.delta:
        raise InputError(
            f"spec step {spec.delta} h does not match series step "
            f"{wind.delta} h")
    return LpInstance(demand.values - wind.values, spec, objective)


def solve(instance: LpInstance) -> LpSolution:
    """Solve one instance to proven optimality.

    The returned status is "optimal" only when the primal residuals and
    the pricing pass both certify the solution at 1e-9; an iteration-cap
    or conditioning problem comes back as "numeric_failure" (the
    constraint set is never empty, since g can absorb any deficit).
    """
    spec = instance.spec
    obj = (_kernels.OBJ_PEAK if instance.objective == "peak"
           else _kernels.OBJ_AVG)
    code, iters, x, g, l, total_g, peak_step = _kernels.solve_alignment(
        instance.r, spec.energy_mwh, spec.power_mw, spec.retention,
        spec.delta, obj)
    schedule = DispatchSchedule(x, g, l, spec)
    n = len(instance)
    if instance.objective == "peak":
        value = peak_step / spec.delta
    else:
        value = total_g / (n * spec.delta)
    return LpSolution(float(value), schedule,
                      _STATUS_BY_CODE.get(int(code), STATUS_NUMERIC),
                      int(iters))


_CACHE_MAX = 65536
_alignment_cache: OrderedDict[tuple, float] = OrderedDict()


def clear_alignment_cache() -> None:
    _alignment_cache.clear()


def power_alignment(wind: EnergySeries, demand: EnergySeries, spec: BessSpec,
                    objective: str = "avg") -> float:
    """Minimal peaker power g(B, P) in MW for the given ratings.

    Memoized on the data fingerprint and the ratings, so surface sweeps
    re-solving the same grid point pay the solve once. Raises EngineError
    when the solver cannot certify optimality.
    """
    objective = normalize_objective(objective)
    _check_pair(wind, demand)
    if wind.delta != spec.delta:
        raise InputError(
            f"spec step {spec.delta} h does not match series step "
            f"{wind.delta} h")
    r = demand.values - wind.values
    key = (hashlib.sha256(r.tobytes()).hexdigest(), r.size,
           spec.energy_mwh, spec.power_mw, spec.retention, spec.delta,
           objective)
    hit = _alignment_cache.get(key)
    if hit is not None:
        _alignment_cache.move_to_end(key)
        return hit
    sol = solve(LpInstance(r, spec, objective))
    if sol.status != STATUS_OPTIMAL:
        raise EngineError(
            f"solver failed ({sol.status}) at B={spec.energy_mwh}, "
            f"P={spec.power_mw}, objective={objective}")
    value = sol.objective_value
    if value < 0.0:
        # the true value is a minimum over nonnegative variables; anything
        # below zero past pivot roundoff means the solve went wrong
        scale = max(1.0, float(np.max(np.abs(r))) / spec.delta)
        if value < -1e-9 * scale:
            raise EngineError(
                f"solver returned {value} < 0 at B={spec.energy_mwh}, "
                f"P={spec.power_mw}, objective={objective}")
        value = 0.0
    _alignment_cache[key] = value
    if len(_alignment_cache) > _CACHE_MAX:
        _alignment_cache.popitem(last=False)
    return value
