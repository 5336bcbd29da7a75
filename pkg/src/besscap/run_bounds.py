"""Run structure of the cumulative excess demand and the sizing bounds.

The cumulative series R alternates between local minima n_1, n_2, ... and
local maxima m_1, m_2, ... (an initial maximum at position 0 is numbered
m_0 and acts as the path source). The rise

    xi(i, j) = R(m_i) - R(n_j),  j <= i

is the net excess demand between an earlier minimum and a later maximum.
A battery of capacity B absorbs at most B of each rise; a max-cost path
over the maxima therefore lower-bounds the total peaker energy, and the
bound is tight for a lossless battery whose power rating never binds.

Positions 0 and N always count as extrema. Zero steps are absorbed into
the preceding run, so an interior extremum sits at the last index of its
plateau; identically flat series get a maximum at 0 and a minimum at N.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InputError, PreconditionError
from .series import CumulativeSeries, EnergySeries, _check_pair

EA_REL_TOL = 1e-6


@dataclass(frozen=True)
class RunDecomposition:
    """Alternating extrema of a cumulative series.

    Attributes:
        minima_idx: positions of local minima, strictly increasing.
        maxima_idx: positions of local maxima, strictly increasing.
        R: the decomposed cumulative series.
    """

    minima_idx: np.ndarray
    maxima_idx: np.ndarray
    R: CumulativeSeries

    def __post_init__(self) -> None:
        mins = np.ascontiguousarray(self.minima_idx, dtype=np.int64)
        maxs = np.ascontiguousarray(self.maxima_idx, dtype=np.int64)
        mins.flags.writeable = False
        maxs.flags.writeable = False
        object.__setattr__(self, "minima_idx", mins)
        object.__setattr__(self, "maxima_idx", maxs)
        if mins.size == 0 or maxs.size == 0:
            raise InputError("decomposition must contain both extremum kinds")
        n = len(self.R) - 1
        merged = sorted([(int(p), 0) for p in mins]
                        + [(int(p), 1) for p in maxs])
        positions = [p for p, _ in merged]
        kinds = [k for _, k in merged]
        if positions[0] != 0 or positions[-1] != n:
            raise InputError("extrema must include positions 0 and N")
        if len(set(positions)) != len(positions):
            raise InputError("extremum positions must be distinct")
        if any(kinds[i] == kinds[i + 1] for i in range(len(kinds) - 1)):
            raise InputError("extrema must alternate min/max")

    @property
    def starts_with_max(self) -> bool:
        """True when position 0 is a maximum (the path source m_0)."""
        return int(self.maxima_idx[0]) == 0

    @property
    def num_maxima(self) -> int:
        """Count of maxima m_1..m_L, excluding a source maximum at 0."""
        return int(self.maxima_idx.size) - (1 if self.starts_with_max else 0)

    @property
    def num_minima(self) -> int:
        return int(self.minima_idx.size)

    def max_position(self, i: int) -> int:
        """Position of m_i; i = 0 is valid only for a leading maximum."""
        off = 1 if self.starts_with_max else 0
        if i == 0:
            if not self.starts_with_max:
                raise InputError("m_0 exists only when the series starts "
                                 "with a maximum")
            return 0
        if not 1 <= i <= self.num_maxima:
            raise InputError(
                f"maximum index {i} outside 1..{self.num_maxima}")
        return int(self.maxima_idx[off + i - 1])

    def min_position(self, j: int) -> int:
        """Position of n_j, 1-based."""
        if not 1 <= j <= self.num_minima:
            raise InputError(
                f"minimum index {j} outside 1..{self.num_minima}")
        return int(self.minima_idx[j - 1])


def decompose(R) -> RunDecomposition:
    """Locate the alternating extrema of a cumulative series.

    Accepts a CumulativeSeries or any array of partial sums that starts
    at zero.
    """
    if not isinstance(R, CumulativeSeries):
        R = CumulativeSeries(R)
    mins, maxs = _kernels.extrema_kernel(R.values)
    return RunDecomposition(mins, maxs, R)


def xi(dec: RunDecomposition, i: int, j: int) -> float:
    """Rise R(m_i) - R(n_j) for j <= i, in MWh.

    The net excess demand accumulated between the j-th minimum and the
    i-th maximum; nonnegative when j = i.
    """
    if j > i:
        raise InputError(f"need j <= i, got i={i}, j={j}")
    if j < 1:
        raise InputError(f"minimum index must be >= 1, got {j}")
    mi = dec.max_position(i)
    nj = dec.min_position(j)
    return float(dec.R.values[mi] - dec.R.values[nj])


def _deep_descent_segments(dec: RunDecomposition, b: float) -> list[int]:
    """Start indices (1-based i) of DP segments split at deep descents.

    A descent from m_k down to n_{k+1} that exceeds B empties any battery
    of capacity B, so no rise reaching past it can beat the path that
    stops at m_k; the recursion decomposes there.
    """
    R = dec.R.values
    starts = [1]
    for k in range(1, dec.num_maxima):
        if float(R[dec.max_position(k)] - R[dec.min_position(k + 1)]) > b:
            starts.append(k + 1)
    return starts


def dp_peaker_energy(dec: RunDecomposition, b: float,
                     prefilter: bool = False) -> float:
    """Minimal total peaker energy (MWh) for capacity b, by max-cost path.

    Exact for a lossless battery with an inactive power limit; a lower
    bound otherwise. With prefilter=True the recursion is split at
    descents deeper than b, which cannot change the result but shrinks
    the quadratic factor on long series.
    """
    if b < 0:
        raise InputError(f"capacity must be >= 0, got {b}")
    R = dec.R.values
    mins = dec.minima_idx
    maxs = dec.maxima_idx
    if not prefilter:
        return float(_kernels.dp_total(R, mins, maxs, float(b), 0.0))
    off = 1 if dec.starts_with_max else 0
    starts = _deep_descent_segments(dec, b)
    starts.append(dec.num_maxima + 1)
    # the running total seeds the next segment's source, so the additions
    # happen in the same order as in the unsplit recursion
    total = 0.0
    for s in range(len(starts) - 1):
        a, c = starts[s], starts[s + 1] - 1
        if c < a:
            continue
        seg_maxs = maxs[off + a - 1:off + c]
        seg_mins = mins[a - 1:c]
        total = float(_kernels.dp_total(R, seg_mins, seg_maxs, float(b),
                                        total))
    return total


@dataclass(frozen=True)
class DpDetails:
    """Per-node values of the max-cost-path recursion at capacity b.

    Node 0 is the source (the maximum at position 0 when one exists,
    virtual otherwise); node k >= 1 is m_k. g_values[k] is the best path
    cost into node k and predecessor_min[k] the 1-based index of the
    minimum the best path descends through (0 when every path in is
    costless).
    """

    b: float
    total: float
    node_positions: tuple
    g_values: tuple
    predecessor_min: tuple


def dp_details(dec: RunDecomposition, b: float) -> DpDetails:
    """dp_peaker_energy plus the per-node diagnostics."""
    if b < 0:
        raise InputError(f"capacity must be >= 0, got {b}")
    G, pred = _kernels.dp_nodes(dec.R.values, dec.minima_idx,
                                dec.maxima_idx, float(b), 0.0)
    positions = [0 if dec.starts_with_max else None]
    positions += [dec.max_position(i) for i in range(1, dec.num_maxima + 1)]
    return DpDetails(float(b), float(G[-1]), tuple(positions),
                     tuple(float(v) for v in G),
                     tuple(int(v) for v in pred))


def dp_dag(dec: RunDecomposition, b: float) -> dict:
    """The recursion's DAG as a JSON-ready dict for visualization.

    Nodes are the source and the maxima with their best path costs; every
    admissible hop (predecessor m_{j-1}, descend to n_j, rise to m_i)
    appears as an edge with its clipped cost. The chosen max-cost path is
    listed as node ids.
    """
    det = dp_details(dec, b)
    R = dec.R.values
    nodes = []
    for k, pos in enumerate(det.node_positions):
        nodes.append({
            "id": k,
            "position": pos,
            "cumulative_mwh": None if pos is None else float(R[pos]),
            "best_cost_mwh": det.g_values[k],
        })
    edges = []
    L = dec.num_maxima
    for i in range(1, L + 1):
        for j in range(1, i + 1):
            rise = xi(dec, i, j)
            edges.append({
                "from": j - 1,
                "to": i,
                "via_min_position": dec.min_position(j),
                "rise_mwh": rise,
                "cost_mwh": max(rise - b, 0.0),
            })
    path = []
    node = L
    while node >= 1:
        path.append(node)
        j = det.predecessor_min[node]
        node = (j if j > 0 else node) - 1
    path.append(0)
    path.reverse()
    return {
        "capacity_mwh": float(b),
        "total_peaker_mwh": det.total,
        "nodes": nodes,
        "edges": edges,
        "max_cost_path": path,
    }


def dp_dag_json(dec: RunDecomposition, b: float, indent: int = 2) -> str:
    return json.dumps(dp_dag(dec, b), indent=indent, sort_keys=True)


def _rectified_final(R: np.ndarray) -> float:
    return float(_kernels.kahan_total(np.maximum(np.diff(R), 0.0)))


def b_sharp(dec: RunDecomposition, demand_total: float | None = None) -> float:
    """Capacity (MWh) sufficient to run with no peaker and no spill.

    Valid only when wind and demand carry equal total energy; checked as
    |R(N)| <= 1e-6 * total demand. When the caller does not supply the
    total demand, the total positive excess stands in for it (a tighter
    test, since it is never larger).
    """
    R = dec.R.values
    scale = demand_total if demand_total is not None else _rectified_final(R)
    if scale < 0 or abs(float(R[-1])) > EA_REL_TOL * scale:
        raise PreconditionError(
            "wind and demand totals differ (equal-averages condition "
            f"violated): residual {float(R[-1])!r} MWh exceeds "
            f"{EA_REL_TOL:g} of {scale!r} MWh")
    return float(np.max(R) - np.min(R))


def b_sharp_g(dec: RunDecomposition) -> float:
    """Capacity (MWh) above which the minimal total peaker energy is zero.

    The largest rise of the cumulative series, max over n of
    R(n) - min_{m <= n} R(m); needs no balance between wind and demand.
    """
    R = dec.R.values
    return float(np.max(R - np.minimum.accumulate(R)))


def endpoint_g00(wind: EnergySeries, demand: EnergySeries) -> dict:
    """Storage-free alignment in MW for both objectives, in closed form.

    With no battery the peaker covers every per-step deficit, so the
    average is the total positive excess over the window and the peak is
    the largest single-step deficit.
    """
    _check_pair(wind, demand)
    r = demand.values - wind.values
    n = len(wind)
    g_av = float(_kernels.kahan_total(np.maximum(r, 0.0))) / (n * wind.delta)
    g_peak = max(float(np.max(r)), 0.0) / wind.delta
    return {"g_av00": g_av, "g_peak00": g_peak}
