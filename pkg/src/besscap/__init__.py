"""Sizing a wind-captive battery by its effect on peaker-plant power.

The package computes the minimal peaker power g(B, P) left after a
battery of energy rating B and power rating P absorbs what it can of the
gap between wind and demand, by three mutually validating routes: an
exact linear program, a greedy charging simulation, and a max-cost-path
recursion over the runs of the cumulative excess demand. On top of g it
derives capacity measures, minimal sizings, and sweep surfaces, exposed
through a CLI (`besscap`) and an HTTP service (`besscap.service:app`).
"""

from .alignment_lp import (
    LpInstance,
    LpSolution,
    build_instance,
    power_alignment,
    solve,
)
from .bess_sim import (
    BessSpec,
    DispatchSchedule,
    GreedyStep,
    best_greedy_initial_state,
    greedy_simulate,
    greedy_step,
    normalize_objective,
)
from .capacity import (
    AlignmentSurface,
    IncrementalCapacity,
    RayConstraint,
    capacity,
    data_fingerprint,
    default_b_grid,
    default_grids,
    efficiency,
    incremental_capacity,
    normalized_capacity,
    surface_value,
    sweep_surface,
)
from .errors import (
    BesscapError,
    ConfigError,
    EmptyInputError,
    EngineError,
    GapError,
    InputError,
    PreconditionError,
    SchemaError,
    StateError,
    TimeOrderError,
    ToleranceError,
)
from .run_bounds import (
    DpDetails,
    RunDecomposition,
    b_sharp,
    b_sharp_g,
    decompose,
    dp_dag,
    dp_details,
    dp_peaker_energy,
    endpoint_g00,
    xi,
)
from .series import (
    CumulativeSeries,
    EnergySeries,
    TurbineModel,
    average_powers,
    cumulate,
    excess_demand,
    rectified_cumulate,
    scale_to_ea,
    speeds_to_energy,
    wind_power_from_speed,
)
from .validate import cross_engine_report

__version__ = "0.1.0"

__all__ = [
    "AlignmentSurface",
    "BesscapError",
    "BessSpec",
    "ConfigError",
    "CumulativeSeries",
    "DispatchSchedule",
    "DpDetails",
    "EmptyInputError",
    "EnergySeries",
    "EngineError",
    "GapError",
    "GreedyStep",
    "IncrementalCapacity",
    "InputError",
    "LpInstance",
    "LpSolution",
    "PreconditionError",
    "RayConstraint",
    "RunDecomposition",
    "SchemaError",
    "StateError",
    "TimeOrderError",
    "ToleranceError",
    "TurbineModel",
    "average_powers",
    "b_sharp",
    "b_sharp_g",
    "best_greedy_initial_state",
    "build_instance",
    "capacity",
    "cross_engine_report",
    "cumulate",
    "data_fingerprint",
    "decompose",
    "default_b_grid",
    "default_grids",
    "dp_dag",
    "dp_details",
    "dp_peaker_energy",
    "efficiency",
    "endpoint_g00",
    "excess_demand",
    "greedy_simulate",
    "greedy_step",
    "incremental_capacity",
    "normalize_objective",
    "normalized_capacity",
    "power_alignment",
    "rectified_cumulate",
    "scale_to_ea",
    "solve",
    "speeds_to_energy",
    "surface_value",
    "sweep_surface",
    "wind_power_from_speed",
    "xi",
]
