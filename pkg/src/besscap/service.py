"""HTTP service exposing the computation pipeline.

Every endpoint is a pure function of its request body: series arrive as
raw per-step energy arrays, never as file paths, so the service needs no
filesystem access and any client (the bundled CLI, curl, a notebook) can
drive it. Run it with:

    uvicorn besscap.service:app

Domain errors return a JSON body {"error_kind": ..., "message": ...}
with status 422 (500 for solver failures); the kind maps back onto the
package's exception types on the client side.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .alignment_lp import build_instance, solve
from .bess_sim import BessSpec, best_greedy_initial_state, greedy_simulate
from .capacity import (
    AlignmentSurface,
    RayConstraint,
    data_fingerprint,
    default_grids,
    efficiency,
    incremental_capacity,
    normalized_capacity,
    surface_value,
    sweep_surface,
)
from .errors import BesscapError, EngineError, PreconditionError
from .run_bounds import (
    b_sharp,
    b_sharp_g,
    decompose,
    dp_dag,
    dp_peaker_energy,
    endpoint_g00,
)
from .series import EnergySeries, cumulate, excess_demand
from .validate import cross_engine_report

app = FastAPI(title="besscap", version=__version__)


@app.exception_handler(BesscapError)
async def _domain_error(request: Request, exc: BesscapError) -> JSONResponse:
    status = 500 if isinstance(exc, EngineError) else 422
    return JSONResponse(status_code=status,
                        content={"error_kind": exc.kind,
                                 "message": str(exc)})


class SeriesPair(BaseModel):
    wind_mwh: list[float]
    demand_mwh: list[float]
    delta_hours: float = Field(gt=0)

    def to_series(self) -> tuple[EnergySeries, EnergySeries]:
        return (EnergySeries(np.asarray(self.wind_mwh), self.delta_hours,
                             "wind"),
                EnergySeries(np.asarray(self.demand_mwh), self.delta_hours,
                             "demand"))


class HealthResponse(BaseModel):
    status: str
    version: str


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


class AlignmentRequest(SeriesPair):
    energy_mwh: float
    power_mw: float
    retention: float = 1.0
    objective: str = "avg"
    include_schedule: bool = False


class ScheduleBody(BaseModel):
    x_mwh: list[float]
    g_mwh: list[float]
    l_mwh: list[float]


class AlignmentResponse(BaseModel):
    value_mw: float
    status: str
    iterations: int
    total_g_mwh: float
    total_l_mwh: float
    g_av_mw: float
    g_peak_mw: float
    schedule: ScheduleBody | None = None


@app.post("/alignment/solve", response_model=AlignmentResponse)
def alignment_solve(req: AlignmentRequest) -> AlignmentResponse:
    wind, demand = req.to_series()
    spec = BessSpec(req.energy_mwh, req.power_mw, req.retention,
                    req.delta_hours)
    sol = solve(build_instance(wind, demand, spec, req.objective))
    if sol.status != "optimal":
        raise EngineError(f"solver failed with status {sol.status}")
    sched = sol.schedule
    body = None
    if req.include_schedule:
        body = ScheduleBody(x_mwh=[float(v) for v in sched.x],
                            g_mwh=[float(v) for v in sched.g],
                            l_mwh=[float(v) for v in sched.l])
    return AlignmentResponse(
        value_mw=sol.objective_value, status=sol.status,
        iterations=sol.iterations, total_g_mwh=sched.total_g_mwh,
        total_l_mwh=sched.total_l_mwh,
        g_av_mw=sched.g_av, g_peak_mw=sched.g_peak, schedule=body)


class GreedyRequest(SeriesPair):
    energy_mwh: float
    power_mw: float
    retention: float = 1.0
    x0_mwh: float | None = None
    objective: str = "avg"
    include_schedule: bool = False


class GreedyResponse(BaseModel):
    x0_mwh: float
    total_g_mwh: float
    total_l_mwh: float
    g_av_mw: float
    g_peak_mw: float
    l_av_mw: float
    schedule: ScheduleBody | None = None


@app.post("/greedy/simulate", response_model=GreedyResponse)
def greedy(req: GreedyRequest) -> GreedyResponse:
    wind, demand = req.to_series()
    spec = BessSpec(req.energy_mwh, req.power_mw, req.retention,
                    req.delta_hours)
    x0 = req.x0_mwh
    if x0 is None:
        x0 = best_greedy_initial_state(wind, demand, spec, req.objective)
    sched = greedy_simulate(wind, demand, spec, x0)
    body = None
    if req.include_schedule:
        body = ScheduleBody(x_mwh=[float(v) for v in sched.x],
                            g_mwh=[float(v) for v in sched.g],
                            l_mwh=[float(v) for v in sched.l])
    return GreedyResponse(
        x0_mwh=float(x0), total_g_mwh=sched.total_g_mwh,
        total_l_mwh=sched.total_l_mwh, g_av_mw=sched.g_av,
        g_peak_mw=sched.g_peak, l_av_mw=sched.l_av, schedule=body)


class SizeResponse(BaseModel):
    n_steps: int
    delta_hours: float
    fingerprint: str
    g_av00_mw: float
    g_peak00_mw: float
    b_sharp_g_mwh: float
    ea_satisfied: bool
    b_sharp_mwh: float | None = None
    ea_message: str | None = None


@app.post("/runs/size", response_model=SizeResponse)
def runs_size(req: SeriesPair) -> SizeResponse:
    wind, demand = req.to_series()
    dec = decompose(cumulate(excess_demand(wind, demand)))
    ends = endpoint_g00(wind, demand)
    bs: float | None
    msg: str | None
    try:
        bs = b_sharp(dec, demand.total)
        msg = None
    except PreconditionError as exc:
        bs = None
        msg = str(exc)
    return SizeResponse(
        n_steps=len(wind), delta_hours=wind.delta,
        fingerprint=data_fingerprint(wind, demand),
        g_av00_mw=ends["g_av00"], g_peak00_mw=ends["g_peak00"],
        b_sharp_g_mwh=b_sharp_g(dec), ea_satisfied=bs is not None,
        b_sharp_mwh=bs, ea_message=msg)


class DpRequest(BaseModel):
    r_mwh: list[float]
    b_mwh: float = Field(ge=0)
    include_dag: bool = False


class DpResponse(BaseModel):
    total_mwh: float
    b_sharp_g_mwh: float
    dag: dict | None = None


@app.post("/runs/dp", response_model=DpResponse)
def runs_dp(req: DpRequest) -> DpResponse:
    r = np.asarray(req.r_mwh, dtype=np.float64)
    dec = decompose(cumulate(r))
    return DpResponse(
        total_mwh=dp_peaker_energy(dec, req.b_mwh),
        b_sharp_g_mwh=b_sharp_g(dec),
        dag=dp_dag(dec, req.b_mwh) if req.include_dag else None)


class SurfaceRequest(SeriesPair):
    retention: float = 1.0
    objective: str = "avg"
    engine: str = "greedy"
    b_grid_mwh: list[float] | None = None
    p_grid_mw: list[float] | None = None
    hours: float = Field(default=4.0, gt=0)
    jobs: int = Field(default=1, ge=1, le=64)


class SurfaceResponse(BaseModel):
    b_grid_mwh: list[float]
    p_grid_mw: list[float]
    g_mw: list[list[float]]
    objective: str
    engine: str
    retention: float
    delta_hours: float
    fingerprint: str
    g00_mw: float


def _build_surface(req: SurfaceRequest) -> AlignmentSurface:
    wind, demand = req.to_series()
    if req.b_grid_mwh is None or req.p_grid_mw is None:
        bg_def, pg_def = default_grids(wind, demand, req.hours)
        bg = np.asarray(req.b_grid_mwh, dtype=np.float64) \
            if req.b_grid_mwh is not None else bg_def
        pg = np.asarray(req.p_grid_mw, dtype=np.float64) \
            if req.p_grid_mw is not None else (
                bg / req.hours if req.b_grid_mwh is not None else pg_def)
    else:
        bg = np.asarray(req.b_grid_mwh, dtype=np.float64)
        pg = np.asarray(req.p_grid_mw, dtype=np.float64)
    base = BessSpec(0.0, 0.0, req.retention, req.delta_hours)
    return sweep_surface(wind, demand, base, bg, pg, req.objective,
                         req.engine, req.jobs)


@app.post("/surface/sweep", response_model=SurfaceResponse)
def surface_sweep(req: SurfaceRequest) -> SurfaceResponse:
    return SurfaceResponse(**_build_surface(req).to_json_dict())


class RayTableRequest(SurfaceRequest):
    target_fraction: float | None = Field(default=None, gt=0, le=1)


class RayRow(BaseModel):
    b_mwh: float
    p_mw: float
    g_mw: float
    kappa_mw: float
    normalized: float
    incremental_mw_per_mw: float
    reduced_accuracy: bool


class RayTableResponse(BaseModel):
    g00_mw: float
    hours: float
    objective: str
    engine: str
    retention: float
    delta_hours: float
    fingerprint: str
    rows: list[RayRow]
    efficiency: dict | None = None


@app.post("/capacity/ray", response_model=RayTableResponse)
def capacity_ray(req: RayTableRequest) -> RayTableResponse:
    wind, demand = req.to_series()
    surface = _build_surface(req)
    ray = RayConstraint.linear(req.hours)
    g00 = surface.g00
    rows = []
    b_max = float(surface.b_grid[-1])
    for p in surface.p_grid:
        p = float(p)
        b = ray.value(p)
        if b > b_max:
            continue
        g = surface_value(surface, b, p)
        inc = incremental_capacity(surface, ray, p)
        rows.append(RayRow(
            b_mwh=b, p_mw=p, g_mw=g,
            kappa_mw=max(g00 - g, 0.0),
            normalized=(normalized_capacity(surface, b, p)
                        if g00 > 0 else 0.0),
            incremental_mw_per_mw=inc.value,
            reduced_accuracy=inc.reduced_accuracy))
    eff = None
    if req.target_fraction is not None:
        eff = efficiency(wind, demand, surface, req.target_fraction, ray)
    return RayTableResponse(
        g00_mw=g00, hours=req.hours, objective=surface.objective,
        engine=surface.engine, retention=surface.retention,
        delta_hours=surface.delta, fingerprint=surface.fingerprint,
        rows=rows, efficiency=eff)


class ValidateRequest(SeriesPair):
    b_values_mwh: list[float] | None = None


class ValidateRow(BaseModel):
    b_mwh: float
    p_mw: float
    lp_mwh: float
    greedy_mwh: float
    dp_mwh: float
    max_rel_diff: float


class ValidateResponse(BaseModel):
    delta_hours: float
    retention: float
    n_steps: int
    fingerprint: str
    tolerance: float
    rows: list[ValidateRow]
    max_rel_diff: float
    passed: bool


@app.post("/validate", response_model=ValidateResponse)
def validate_engines(req: ValidateRequest) -> ValidateResponse:
    wind, demand = req.to_series()
    report = cross_engine_report(wind, demand, req.b_values_mwh)
    return ValidateResponse(**report)


class InstanceDumpRequest(SeriesPair):
    energy_mwh: float
    power_mw: float
    retention: float = 1.0
    objective: str = "avg"


class InstanceDumpResponse(BaseModel):
    instance: dict
    debug_text: str


@app.post("/alignment/dump", response_model=InstanceDumpResponse)
def alignment_dump(req: InstanceDumpRequest) -> InstanceDumpResponse:
    wind, demand = req.to_series()
    spec = BessSpec(req.energy_mwh, req.power_mw, req.retention,
                    req.delta_hours)
    inst = build_instance(wind, demand, spec, req.objective)
    return InstanceDumpResponse(instance=inst.to_dict(),
                                debug_text=inst.to_debug_text())
