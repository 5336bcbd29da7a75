"""Alignment surfaces over (B, P) grids and capacity measures along rays.

The surface samples the minimal peaker power g(B, P); the capacity
kappa(B, P) = g(0,0) - g(B, P) is the peaker power the battery saves,
its normalized form divides by g(0,0), and the incremental capacity is
the directional derivative -grad(g) . v along a sizing ray such as the
four-hour family B = 4P. Queries between samples interpolate bilinearly;
gradients are finite differences at the local grid spacing.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .alignment_lp import power_alignment
from .bess_sim import BessSpec, greedy_simulate, normalize_objective
from .errors import EngineError, InputError
from .series import EnergySeries, _check_pair

ENGINES = ("lp", "greedy")


def data_fingerprint(wind: EnergySeries, demand: EnergySeries) -> str:
    """sha256 over the little-endian bytes of both series and the step."""
    h = hashlib.sha256()
    h.update(wind.values.astype("<f8", copy=False).tobytes())
    h.update(demand.values.astype("<f8", copy=False).tobytes())
    h.update(np.float64(wind.delta).astype("<f8").tobytes())
    return h.hexdigest()


def _check_grid(grid: np.ndarray, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(grid, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InputError(f"{name} must be a nonempty one-dimensional array")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite values")
    if arr[0] != 0.0:
        raise InputError(f"{name} must start at 0")
    if arr.size > 1 and not np.all(np.diff(arr) > 0):
        raise InputError(f"{name} must be strictly ascending")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class AlignmentSurface:
    """Sampled g(B, P) in MW over ascending B and P grids.

    values[i, j] = g(b_grid[i], p_grid[j]). The first row and column sit
    on the axes, where the surface equals the storage-free value g(0,0).
    """

    b_grid: np.ndarray
    p_grid: np.ndarray
    values: np.ndarray
    objective: str
    engine: str
    retention: float
    delta: float
    fingerprint: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "b_grid",
                           _check_grid(self.b_grid, "b_grid"))
        object.__setattr__(self, "p_grid",
                           _check_grid(self.p_grid, "p_grid"))
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.shape != (self.b_grid.size, self.p_grid.size):
            raise InputError(
                f"values shape {vals.shape} does not match the grids "
                f"({self.b_grid.size}, {self.p_grid.size})")
        if not np.all(np.isfinite(vals)):
            raise EngineError("surface contains non-finite cells")
        if np.any(vals < 0.0):
            raise EngineError("surface contains negative cells")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "objective",
                           normalize_objective(self.objective))
        if self.engine not in ENGINES:
            raise InputError(f"engine must be one of {ENGINES}")

    @property
    def g00(self) -> float:
        """Storage-free alignment g(0, 0) in MW."""
        return float(self.values[0, 0])

    def monotonicity_violation(self) -> float:
        """Largest increase along either axis (0 for a monotone surface)."""
        v = self.values
        worst = 0.0
        if v.shape[0] > 1:
            worst = max(worst, float(np.max(np.diff(v, axis=0))))
        if v.shape[1] > 1:
            worst = max(worst, float(np.max(np.diff(v, axis=1))))
        return max(worst, 0.0)

    def to_csv(self) -> str:
        """Long-format table b_mwh,p_mw,g_mw, one row per cell."""
        lines = ["b_mwh,p_mw,g_mw"]
        for i, b in enumerate(self.b_grid):
            for j, p in enumerate(self.p_grid):
                lines.append(f"{b:.17g},{p:.17g},{self.values[i, j]:.17g}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "b_grid_mwh": [float(v) for v in self.b_grid],
            "p_grid_mw": [float(v) for v in self.p_grid],
            "g_mw": [[float(v) for v in row] for row in self.values],
            "objective": self.objective,
            "engine": self.engine,
            "retention": self.retention,
            "delta_hours": self.delta,
            "fingerprint": self.fingerprint,
            "g00_mw": self.g00,
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=indent)

    @staticmethod
    def from_json_dict(doc: dict) -> "AlignmentSurface":
        try:
            return AlignmentSurface(
                np.asarray(doc["b_grid_mwh"], dtype=np.float64),
                np.asarray(doc["p_grid_mw"], dtype=np.float64),
                np.asarray(doc["g_mw"], dtype=np.float64),
                doc["objective"], doc["engine"],
                float(doc["retention"]), float(doc["delta_hours"]),
                doc.get("fingerprint", ""))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed surface document: {exc}") from exc


@dataclass(frozen=True)
class RayConstraint:
    """A sizing ray tying the two battery ratings together.

    kind "B_of_P" maps the parameter P to a capacity B = f(P); kind
    "P_of_B" maps B to P = f(B). f comes either from the built-in linear
    family (coeff) or from tabulated samples interpolated linearly; it
    must be nonnegative and nondecreasing, so the ray sweeps outward.
    """

    kind: str
    coeff: float | None = None
    xs: np.ndarray | None = None
    fs: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("B_of_P", "P_of_B"):
            raise InputError("ray kind must be 'B_of_P' or 'P_of_B'")
        if (self.coeff is None) == (self.xs is None):
            raise InputError("ray needs either a coefficient or samples")
        if self.coeff is not None:
            if not self.coeff >= 0:
                raise InputError(f"ray slope must be >= 0, got {self.coeff}")
            return
        xs = np.ascontiguousarray(self.xs, dtype=np.float64)
        fs = np.ascontiguousarray(self.fs, dtype=np.float64)
        if xs.ndim != 1 or xs.size < 2 or xs.shape != fs.shape:
            raise InputError("ray samples need matching 1-d arrays, >= 2 points")
        if not np.all(np.diff(xs) > 0):
            raise InputError("ray sample parameters must be strictly ascending")
        if np.any(fs < 0) or np.any(np.diff(fs) < 0):
            raise InputError("ray values must be nonnegative and nondecreasing")
        xs.flags.writeable = False
        fs.flags.writeable = False
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "fs", fs)

    @staticmethod
    def linear(coeff: float, kind: str = "B_of_P") -> "RayConstraint":
        """The family f(t) = coeff * t, e.g. coeff=4 for a 4-hour battery."""
        return RayConstraint(kind, coeff=float(coeff))

    @staticmethod
    def from_samples(kind: str, params, values) -> "RayConstraint":
        return RayConstraint(kind, xs=np.asarray(params),
                             fs=np.asarray(values))

    def value(self, t: float) -> float:
        if self.coeff is not None:
            if t < 0:
                raise InputError(f"ray parameter must be >= 0, got {t}")
            return self.coeff * t
        if not self.xs[0] <= t <= self.xs[-1]:
            raise InputError(
                f"ray parameter {t} outside the sampled range "
                f"[{self.xs[0]}, {self.xs[-1]}]")
        return float(np.interp(t, self.xs, self.fs))

    def derivative(self, t: float) -> float:
        """Slope of the containing segment (right segment at a node)."""
        if self.coeff is not None:
            return self.coeff
        if not self.xs[0] <= t <= self.xs[-1]:
            raise InputError(
                f"ray parameter {t} outside the sampled range "
                f"[{self.xs[0]}, {self.xs[-1]}]")
        k = int(np.searchsorted(self.xs, t, side="right")) - 1
        k = min(max(k, 0), self.xs.size - 2)
        return float((self.fs[k + 1] - self.fs[k])
                     / (self.xs[k + 1] - self.xs[k]))


FOUR_HOUR_RAY = RayConstraint.linear(4.0)


def default_b_grid(b_sharp_value: float, n: int = 41) -> np.ndarray:
    """Log-spaced capacity grid from 0 to 1.2 * b_sharp_value.

    Zero cannot sit on a geometric ladder, so the grid is 0 followed by
    n-1 geometrically spaced points ending at the cap, with the smallest
    positive point at cap/256.
    """
    if n < 2:
        raise InputError(f"grid needs at least 2 points, got {n}")
    cap = 1.2 * float(b_sharp_value)
    if not cap > 0:
        return np.zeros(1)
    return np.concatenate(([0.0], np.geomspace(cap / 256.0, cap, n - 1)))


def default_grids(wind: EnergySeries, demand: EnergySeries,
                  hours: float = 4.0,
                  n: int = 41) -> tuple[np.ndarray, np.ndarray]:
    """Default (b_grid, p_grid) pair tied by the ray B = hours * P.

    The capacity cap is 1.2 times the zero-peaker-and-spill rating when
    wind and demand balance, else 1.2 times the zero-peaker rating.
    """
    from .run_bounds import b_sharp, b_sharp_g, decompose
    from .series import cumulate, excess_demand
    from .errors import PreconditionError

    if not hours > 0:
        raise InputError(f"hours must be positive, got {hours}")
    dec = decompose(cumulate(excess_demand(wind, demand)))
    try:
        cap = b_sharp(dec, demand.total)
    except PreconditionError:
        cap = b_sharp_g(dec)
    bg = default_b_grid(cap, n)
    return bg, bg / hours


def _cell_value(wind: EnergySeries, demand: EnergySeries, base: BessSpec,
                b: float, p: float, objective: str, engine: str) -> float:
    spec = BessSpec(b, p, base.retention, base.delta)
    if engine == "lp":
        return power_alignment(wind, demand, spec, objective)
    return greedy_simulate(wind, demand, spec,
                           objective=objective).objective_value(objective)


def sweep_surface(wind: EnergySeries, demand: EnergySeries, base: BessSpec,
                  b_grid, p_grid, objective: str = "avg",
                  engine: str = "lp", jobs: int = 1) -> AlignmentSurface:
    """Evaluate g(B, P) on the grid product with the chosen engine.

    Cells are independent pure evaluations, so the result is identical
    however many worker threads compute it. Any failing cell aborts the
    sweep with the cell coordinates in the error, rather than leaving a
    NaN hole.
    """
    objective = normalize_objective(objective)
    if engine not in ENGINES:
        raise InputError(f"engine must be one of {ENGINES}, got {engine!r}")
    if objective == "peak" and engine == "greedy":
        # Greedy dispatch minimizes total peaker energy, not the running
        # maximum: a faster discharge can drain the battery early and raise
        # a later peak, so a greedy "peak surface" would not be g(B, P) and
        # can even increase along the P axis. Only the LP solves that case.
        raise InputError("peak objective requires engine='lp'")
    _check_pair(wind, demand)
    bg = _check_grid(np.asarray(b_grid), "b_grid")
    pg = _check_grid(np.asarray(p_grid), "p_grid")
    if jobs < 1:
        raise InputError(f"jobs must be >= 1, got {jobs}")
    cells = [(i, j) for i in range(bg.size) for j in range(pg.size)]
    vals = np.empty((bg.size, pg.size))

    def run(cell: tuple) -> None:
        i, j = cell
        try:
            vals[i, j] = _cell_value(wind, demand, base, float(bg[i]),
                                     float(pg[j]), objective, engine)
        except Exception as exc:
            raise EngineError(
                f"surface cell B={bg[i]}, P={pg[j]} failed: {exc}") from exc

    if jobs == 1:
        for cell in cells:
            run(cell)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for fut in [pool.submit(run, c) for c in cells]:
                fut.result()
    return AlignmentSurface(bg, pg, vals, objective, engine, base.retention,
                            base.delta, data_fingerprint(wind, demand))


def _locate(grid: np.ndarray, v: float, name: str) -> tuple[int, float]:
    """Cell index k and weight t with v = (1-t)*grid[k] + t*grid[k+1]."""
    if not grid[0] <= v <= grid[-1]:
        raise InputError(
            f"{name}={v} outside the sampled range [{grid[0]}, {grid[-1]}]")
    if grid.size == 1:
        return 0, 0.0
    k = int(np.searchsorted(grid, v, side="right")) - 1
    if k >= grid.size - 1:
        return grid.size - 2, 1.0
    if v == grid[k]:
        return k, 0.0
    return k, float((v - grid[k]) / (grid[k + 1] - grid[k]))


def surface_value(surface: AlignmentSurface, b: float, p: float) -> float:
    """Bilinear interpolation of g at (b, p); exact on grid nodes."""
    i, s = _locate(surface.b_grid, b, "B")
    j, t = _locate(surface.p_grid, p, "P")
    v = surface.values
    i2 = min(i + 1, v.shape[0] - 1)
    j2 = min(j + 1, v.shape[1] - 1)
    top = (1.0 - t) * v[i, j] + t * v[i, j2]
    bot = (1.0 - t) * v[i2, j] + t * v[i2, j2]
    return float((1.0 - s) * top + s * bot)


def capacity(surface: AlignmentSurface, b: float, p: float) -> float:
    """Peaker power saved by the battery, kappa = g(0,0) - g(B,P), MW."""
    return max(surface.g00 - surface_value(surface, b, p), 0.0)


def normalized_capacity(surface: AlignmentSurface, b: float,
                        p: float) -> float:
    """kappa / g(0,0) in [0, 1]; 0 with a warning when g(0,0) = 0."""
    g00 = surface.g00
    if g00 == 0.0:
        warnings.warn("storage-free alignment is zero; normalized capacity "
                      "defined as 0")
        return 0.0
    return min(capacity(surface, b, p) / g00, 1.0)


class IncrementalCapacity(NamedTuple):
    """Directional derivative estimate; reduced_accuracy marks one-sided
    differences forced by a grid boundary."""

    value: float
    reduced_accuracy: bool


def _axis_slope(grid: np.ndarray, at: float, sample: Callable[[float], float],
                name: str) -> tuple[float, bool]:
    """Finite-difference slope along one axis at the local grid spacing.

    On a node, central across the two neighboring cells; inside a cell,
    the cell's own slope (the exact derivative of the bilinear surface);
    at the first or last node, one-sided and flagged.
    """
    if grid.size < 2:
        raise InputError(f"cannot differentiate along a single-point "
                         f"{name} grid")
    k, t = _locate(grid, at, name)
    if 0.0 < t < 1.0:
        lo, hi = grid[k], grid[k + 1]
        return ((sample(float(hi)) - sample(float(lo))) / float(hi - lo),
                False)
    node = k if t == 0.0 else k + 1
    lo = node - 1
    hi = node + 1
    reduced = False
    if lo < 0:
        lo, reduced = 0, True
    if hi > grid.size - 1:
        hi, reduced = grid.size - 1, True
    glo, ghi = float(grid[lo]), float(grid[hi])
    return (sample(ghi) - sample(glo)) / (ghi - glo), reduced


def incremental_capacity(surface: AlignmentSurface, ray: RayConstraint,
                         at: float) -> IncrementalCapacity:
    """-grad(g) . v at the ray point with parameter `at`, MW per unit.

    For kind B_of_P the point is (f(at), at) and v = (f'(at), 1), so for
    the linear ray B = 4P this is -d/dP of g(4P, P). For kind P_of_B the
    point is (at, f(at)) and v = (1, f'(at)).
    """
    if ray.kind == "B_of_P":
        b0, p0 = ray.value(at), float(at)
        v = (ray.derivative(at), 1.0)
    else:
        b0, p0 = float(at), ray.value(at)
        v = (1.0, ray.derivative(at))
    dgdb, red_b = _axis_slope(surface.b_grid, b0,
                              lambda b: surface_value(surface, b, p0), "B")
    dgdp, red_p = _axis_slope(surface.p_grid, p0,
                              lambda p: surface_value(surface, b0, p), "P")
    # the +0.0 turns a -0.0 from flat slopes into plain 0.0
    return IncrementalCapacity(-(dgdb * v[0] + dgdp * v[1]) + 0.0,
                               red_b or red_p)


def efficiency(wind: EnergySeries, demand: EnergySeries,
               surface: AlignmentSurface, target_fraction: float,
               ray: RayConstraint = FOUR_HOUR_RAY,
               tol_frac: float = 1e-6) -> dict:
    """Smallest battery on the ray recovering a fraction of g(0,0).

    Bisects the ray parameter for the smallest B whose normalized
    capacity reaches target_fraction, then reports the recovered power
    per MW of battery rating: target_fraction * g(0,0) / P.
    """
    if not 0.0 < target_fraction <= 1.0:
        raise InputError(
            f"target_fraction must be in (0, 1], got {target_fraction}")
    if ray.kind != "B_of_P":
        raise InputError("efficiency search expects a B_of_P ray")
    fp = data_fingerprint(wind, demand)
    if surface.fingerprint and surface.fingerprint != fp:
        raise InputError(
            "surface was computed from different data (fingerprint mismatch)")
    if surface.g00 == 0.0:
        raise InputError("storage-free alignment is already zero; nothing "
                         "for a battery to recover")
    b_max = float(surface.b_grid[-1])
    p_max = float(surface.p_grid[-1])
    if ray.coeff is not None:
        t_lo = 0.0
        t_hi = p_max if ray.coeff == 0.0 else min(p_max, b_max / ray.coeff)
    else:
        t_lo = float(ray.xs[0])
        t_hi = min(p_max, float(ray.xs[-1]))
        while t_hi > t_lo and ray.value(t_hi) > b_max:
            t_hi = t_lo + 0.5 * (t_hi - t_lo)

    def frac(t: float) -> float:
        return normalized_capacity(surface, ray.value(t), t)

    achievable = frac(t_hi)
    if achievable + 1e-12 < target_fraction:
        raise InputError(
            f"target fraction {target_fraction} unreachable on this grid; "
            f"max achievable is {achievable:.6g} at B={ray.value(t_hi):.6g} "
            f"MWh")
    lo, hi = t_lo, t_hi
    tol = tol_frac * max(t_hi, 1e-300)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if frac(mid) >= target_fraction:
            hi = mid
        else:
            lo = mid
    b_star, p_star = ray.value(hi), hi
    if p_star <= 0.0:
        raise InputError("target already met with no battery")
    recovered = target_fraction * surface.g00
    return {
        "b_mwh": float(b_star),
        "p_mw": float(p_star),
        "efficiency": float(recovered / p_star),
        "recovered_mw": float(recovered),
        "g00_mw": surface.g00,
    }
