"""Wind and demand series: types, conversion, cumulative quantities, CSV I/O.

Energy is MWh per step, power is MW, the step length delta is in hours.
Wind and demand live in EnergySeries and are elementwise nonnegative; the
signed excess demand r(n) = d(n) - w(n) is a plain float array.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from . import _kernels
from .errors import (
    EmptyInputError,
    GapError,
    InputError,
    SchemaError,
    TimeOrderError,
)

BETZ_LIMIT = 16.0 / 27.0


def _as_readonly_f64(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional")
    if arr.size == 0:
        raise EmptyInputError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class EnergySeries:
    """Uniformly sampled per-step energy sequence.

    Attributes:
        values: per-step energies in MWh, elementwise >= 0.
        delta: step length in hours, > 0.
        label: free text, e.g. "wind" or "demand".
    """

    values: np.ndarray
    delta: float
    label: str = ""

    def __post_init__(self) -> None:
        arr = _as_readonly_f64(self.values, "values")
        if np.any(arr < 0.0):
            raise InputError(f"{self.label or 'series'} has negative energies")
        if not (isinstance(self.delta, (int, float)) and self.delta > 0
                and math.isfinite(self.delta)):
            raise InputError("delta must be a positive finite number of hours")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "delta", float(self.delta))

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def total(self) -> float:
        """Total energy in MWh."""
        return float(_kernels.kahan_total(self.values))

    @property
    def average_power(self) -> float:
        """Total energy over the window length, in MW."""
        return self.total / (len(self) * self.delta)


@dataclass(frozen=True)
class CumulativeSeries:
    """Partial sums of a per-step sequence, with values[0] = 0."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = _as_readonly_f64(self.values, "values")
        if arr.size < 2:
            raise InputError("cumulative series needs at least one step")
        if arr[0] != 0.0:
            raise InputError("cumulative series must start at exactly 0")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def steps(self) -> np.ndarray:
        """First differences; reproduces the source sequence."""
        return np.diff(self.values)


@dataclass(frozen=True)
class TurbineModel:
    """Swept-area turbine with a cubic speed-to-power law.

    Attributes:
        rotor_radius: blade radius in meters.
        air_density: kg/m^3.
        power_coefficient: aerodynamic efficiency, in (0, 16/27].
        cut_in: lowest operating speed (m/s), inclusive.
        cut_out: speed at and above which output is zero (m/s).
    """

    rotor_radius: float = 118.0
    air_density: float = 1.225
    power_coefficient: float = 0.45
    cut_in: float = 1.0
    cut_out: float = 80.0

    def __post_init__(self) -> None:
        if not self.rotor_radius > 0:
            raise InputError("rotor_radius must be positive")
        if not self.air_density > 0:
            raise InputError("air_density must be positive")
        if not 0.0 < self.power_coefficient <= BETZ_LIMIT:
            raise InputError(
                f"power_coefficient must be in (0, 16/27], got "
                f"{self.power_coefficient}")
        if not (0.0 <= self.cut_in < self.cut_out):
            raise InputError("need 0 <= cut_in < cut_out")

    @property
    def swept_area(self) -> float:
        return math.pi * self.rotor_radius ** 2


def wind_power_from_speed(v: float, model: TurbineModel) -> float:
    """Instantaneous turbine power in MW at wind speed v (m/s).

    Cubic law (rho/2) Cp v^3 A scaled by 1e-6 to MW; zero below cut_in and
    at or above cut_out. No rated-power saturation plateau.
    """
    if not (isinstance(v, (int, float)) and math.isfinite(v)):
        raise InputError(f"wind speed must be finite, got {v!r}")
    if v < 0.0:
        raise InputError(f"wind speed must be nonnegative, got {v}")
    if v < model.cut_in or v >= model.cut_out:
        return 0.0
    return (0.5 * model.air_density * model.power_coefficient
            * v ** 3 * model.swept_area * 1e-6)


def _wind_power_array(speeds: np.ndarray, model: TurbineModel) -> np.ndarray:
    p = (0.5 * model.air_density * model.power_coefficient
         * speeds ** 3 * model.swept_area * 1e-6)
    return np.where((speeds >= model.cut_in) & (speeds < model.cut_out),
                    p, 0.0)


def speeds_to_energy(speeds, model: TurbineModel, delta: float,
                     label: str = "wind") -> EnergySeries:
    """Convert per-step wind speeds (m/s) to per-step energies (MWh)."""
    arr = _as_readonly_f64(speeds, "speeds")
    if np.any(arr < 0.0):
        raise InputError("wind speeds must be nonnegative")
    if not delta > 0:
        raise InputError("delta must be positive")
    return EnergySeries(_wind_power_array(arr, model) * delta, delta, label)


def _check_pair(wind: EnergySeries, demand: EnergySeries) -> None:
    if len(wind) != len(demand):
        raise InputError(
            f"length mismatch: wind has {len(wind)} steps, demand "
            f"{len(demand)}")
    if wind.delta != demand.delta:
        raise InputError(
            f"step mismatch: wind delta {wind.delta} h, demand "
            f"{demand.delta} h")


def scale_to_ea(wind: EnergySeries, demand: EnergySeries) -> EnergySeries:
    """Scale demand so its total energy equals the wind total exactly.

    The equal-averages condition downstream results assume. Raises on zero
    total demand.
    """
    _check_pair(wind, demand)
    dtot = demand.total
    if dtot <= 0.0:
        raise InputError("total demand is zero; cannot scale to equal averages")
    s = wind.total / dtot
    return EnergySeries(demand.values * s, demand.delta,
                        demand.label or "demand")


def excess_demand(wind: EnergySeries, demand: EnergySeries) -> np.ndarray:
    """Signed per-step excess demand r(n) = d(n) - w(n) in MWh."""
    _check_pair(wind, demand)
    return demand.values - wind.values


def cumulate(seq) -> CumulativeSeries:
    """Partial sums with a leading zero (compensated summation)."""
    arr = _as_readonly_f64(seq, "sequence")
    return CumulativeSeries(_kernels.kahan_cumsum(arr))


def rectified_cumulate(seq) -> CumulativeSeries:
    """Partial sums of the positive parts with a leading zero."""
    arr = _as_readonly_f64(seq, "sequence")
    return CumulativeSeries(_kernels.kahan_cumsum_pos(arr))


def average_powers(wind: EnergySeries, demand: EnergySeries,
                   schedule=None) -> dict:
    """Window-average powers in MW, plus the peak peaker power.

    With schedule=None the no-storage dispatch is assumed: the peaker
    covers every deficit and every surplus is spilled.
    """
    _check_pair(wind, demand)
    n = len(wind)
    nd = n * wind.delta
    r = excess_demand(wind, demand)
    if schedule is None:
        g_total = float(_kernels.kahan_total(np.maximum(r, 0.0)))
        l_total = float(_kernels.kahan_total(np.maximum(-r, 0.0)))
        g_peak_step = float(np.max(np.maximum(r, 0.0)))
    else:
        g_total = float(_kernels.kahan_total(schedule.g))
        l_total = float(_kernels.kahan_total(schedule.l))
        g_peak_step = float(np.max(schedule.g)) if len(schedule.g) else 0.0
    return {
        "w_av": wind.average_power,
        "d_av": demand.average_power,
        "g_av": g_total / nd,
        "l_av": l_total / nd,
        "g_peak": g_peak_step / wind.delta,
    }


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimedSeries:
    """A parsed, gap-filled, uniformly sampled raw column."""

    start: datetime
    step_hours: float
    values: np.ndarray = field(repr=False)


def _parse_timestamp(text: str, path: str, line: int) -> datetime:
    t = text.strip()
    if t.endswith("Z"):
        t = t[:-1] + "+00:00"
    try:
        return datetime.fromisoformat(t)
    except ValueError as exc:
        raise SchemaError(
            f"{path}:{line}: unparsable ISO-8601 timestamp {text!r}") from exc


def read_timed_csv(path: str, ts_col: str, val_col: str,
                   max_gap_steps: int = 0) -> TimedSeries:
    """Read one (timestamp, value) column pair from a headered CSV.

    Timestamps must be strictly increasing on a uniform grid; missing rows
    are linearly interpolated when the hole spans at most max_gap_steps
    samples, otherwise the file is rejected.
    """
    times: list[datetime] = []
    vals: list[float] = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyInputError(f"{path}: no header row")
        fields = [f.strip() for f in reader.fieldnames]
        for col in (ts_col, val_col):
            if col not in fields:
                raise SchemaError(
                    f"{path}: missing column {col!r} (found {fields})")
        for i, row in enumerate(reader, start=2):
            raw_ts = row.get(ts_col)
            raw_v = row.get(val_col)
            if raw_ts is None or raw_v is None or raw_ts.strip() == "":
                raise SchemaError(f"{path}:{i}: short row")
            times.append(_parse_timestamp(raw_ts, path, i))
            try:
                v = float(raw_v)
            except ValueError as exc:
                raise SchemaError(
                    f"{path}:{i}: unparsable number {raw_v!r} in "
                    f"{val_col!r}") from exc
            if not math.isfinite(v):
                raise SchemaError(f"{path}:{i}: non-finite value in {val_col!r}")
            vals.append(v)
    if not times:
        raise EmptyInputError(f"{path}: no data rows")
    if len(times) == 1:
        return TimedSeries(times[0], 0.0, np.asarray(vals))
    try:
        diffs = [
            (times[i + 1] - times[i]).total_seconds()
            for i in range(len(times) - 1)
        ]
    except TypeError as exc:
        raise SchemaError(
            f"{path}: mixed naive and timezone-aware timestamps") from exc
    base = min(diffs)
    if base <= 0:
        at = diffs.index(base) + 2
        raise TimeOrderError(
            f"{path}: timestamps not strictly increasing near row {at}")
    # every spacing must be an integer multiple of the base step
    filled_t: list[datetime] = [times[0]]
    filled_v: list[float] = [vals[0]]
    for i, dt in enumerate(diffs):
        k = dt / base
        ki = round(k)
        if abs(k - ki) > 1e-6:
            raise TimeOrderError(
                f"{path}: irregular sampling near row {i + 3} "
                f"({dt} s is not a multiple of {base} s)")
        if ki > 1:
            holes = ki - 1
            if holes > max_gap_steps:
                raise GapError(
                    f"{path}: {holes} missing samples near row {i + 3} "
                    f"exceed the interpolation limit of {max_gap_steps}")
            v0, v1 = vals[i], vals[i + 1]
            for h in range(1, ki):
                filled_t.append(times[i] + timedelta(seconds=base * h))
                filled_v.append(v0 + (v1 - v0) * h / ki)
        filled_t.append(times[i + 1])
        filled_v.append(vals[i + 1])
    return TimedSeries(filled_t[0], base / 3600.0, np.asarray(filled_v))


def resample_mean(series: TimedSeries, delta: float) -> TimedSeries:
    """Mean over non-overlapping windows of length delta hours.

    A trailing partial window is dropped with a warning. The target step
    must be an integer multiple of the native one.
    """
    if series.step_hours == 0.0:
        if delta <= 0:
            raise InputError("delta must be positive")
        return TimedSeries(series.start, delta, series.values)
    ratio = delta / series.step_hours
    k = round(ratio)
    if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
        raise InputError(
            f"target step {delta} h is not an integer multiple of the "
            f"native step {series.step_hours} h")
    if k == 1:
        return TimedSeries(series.start, delta, series.values)
    n = series.values.size // k
    if n == 0:
        raise EmptyInputError(
            f"fewer samples than one {delta} h window")
    if series.values.size % k:
        warnings.warn(
            f"dropping {series.values.size % k} trailing samples that do "
            f"not fill a {delta} h window")
    means = series.values[:n * k].reshape(n, k).mean(axis=1)
    return TimedSeries(series.start, delta, means)


def align_windows(a: TimedSeries, b: TimedSeries
                  ) -> tuple[TimedSeries, TimedSeries]:
    """Trim two same-step series to their overlapping time range."""
    if a.step_hours != b.step_hours:
        raise InputError("cannot align series with different steps")
    step = timedelta(hours=a.step_hours)
    try:
        offset = (b.start - a.start).total_seconds()
    except TypeError as exc:
        raise InputError(
            "cannot align naive and timezone-aware timestamps") from exc
    k = offset / step.total_seconds()
    ki = round(k)
    if abs(k - ki) > 1e-6:
        raise InputError(
            f"series grids are offset by a fraction of a step "
            f"({offset} s vs {step.total_seconds()} s step)")
    # positive ki: b starts later
    a_vals, b_vals = a.values, b.values
    a_start = a.start
    if ki > 0:
        a_vals = a_vals[ki:]
        a_start = a.start + step * ki
    elif ki < 0:
        b_vals = b_vals[-ki:]
    n = min(a_vals.size, b_vals.size)
    if n == 0:
        raise InputError("series do not overlap in time")
    if a_vals.size != n or b_vals.size != n or ki != 0:
        warnings.warn("trimming series to their overlapping time range")
    return (TimedSeries(a_start, a.step_hours, a_vals[:n]),
            TimedSeries(a_start, b.step_hours, b_vals[:n]))


def write_canonical(path: str, start: datetime, series: EnergySeries) -> None:
    """Write the canonical per-step energy CSV (timestamp, mwh_per_step)."""
    step = timedelta(hours=series.delta)
    with open(path, "w", newline="") as fh:
        fh.write("timestamp,mwh_per_step\n")
        for i, v in enumerate(series.values):
            fh.write(f"{(start + step * i).isoformat()},{v:.17g}\n")


def read_canonical(path: str, label: str = "") -> tuple[datetime, EnergySeries]:
    """Read a canonical per-step energy CSV; returns (start, series)."""
    timed = read_timed_csv(path, "timestamp", "mwh_per_step")
    if timed.step_hours == 0.0:
        raise InputError(
            f"{path}: a single-row series has no discernible step")
    return timed.start, EnergySeries(timed.values, timed.step_hours, label)
