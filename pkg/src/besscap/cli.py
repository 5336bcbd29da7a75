"""Command-line driver: ingest CSVs, sweep surfaces, size batteries.

Every compute subcommand is a thin client of the HTTP service: it loads
the canonical series files, posts one request (in-process by default,
or to --server), and writes the response as CSV/JSON artifacts. Only
`ingest` touches raw input data. Configuration comes from a YAML file
plus command-line flags, flags winning; machine outputs carry 17
significant digits, human summaries 4.

Exit codes: 0 success, 1 unexpected failure, 2 bad configuration,
3 schema mismatch, 4 timestamps out of order, 5 gap limit exceeded,
6 empty input, 7 invalid input values, 8 precondition violated,
9 engine failure, 10 tolerance check failed.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone

import click
import numpy as np
import yaml

from .errors import BesscapError, ConfigError, SchemaError, ToleranceError
from .series import (
    EnergySeries,
    TimedSeries,
    TurbineModel,
    align_windows,
    read_canonical,
    read_timed_csv,
    resample_mean,
    scale_to_ea,
    speeds_to_energy,
    write_canonical,
)

WIND_CANONICAL = "wind_canonical.csv"
DEMAND_CANONICAL = "demand_canonical.csv"


@dataclass
class RunConfig:
    """Everything a run needs, from YAML and/or flags."""

    wind_csv: str | None = None
    demand_csv: str | None = None
    wind_timestamp_column: str = "timestamp"
    wind_value_column: str = "speed_mps"
    demand_timestamp_column: str = "timestamp"
    demand_value_column: str = "load_mw"
    delta_hours: float | None = None
    max_gap_steps: int = 3
    ea_scale: bool = True
    turbine: dict = field(default_factory=dict)
    retention: float | None = None
    loss_per_24h: float | None = None
    objective: str = "avg"
    engine: str = "greedy"
    hours: float = 4.0
    b_grid: list | None = None
    p_grid: list | None = None
    b_grid_points: int = 41
    b_values: list | None = None
    target_fraction: float | None = None
    output_dir: str = "out"
    canonical_wind: str | None = None
    canonical_demand: str | None = None
    jobs: int = 1
    no_timestamp: bool = False
    server: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.retention is not None and self.loss_per_24h is not None:
            raise ConfigError(
                "give exactly one of retention / loss_per_24h, not both")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        if self.max_gap_steps < 0:
            raise ConfigError("max_gap_steps must be >= 0")
        if not isinstance(self.turbine, dict):
            raise ConfigError("turbine must be a mapping of parameters")

    def resolve_retention(self, delta: float) -> tuple[float, str]:
        """Per-step retention plus a human-readable derivation note."""
        if self.loss_per_24h is not None:
            loss = float(self.loss_per_24h)
            if not 0.0 <= loss <= 1.0:
                raise ConfigError(
                    f"loss_per_24h must be in [0, 1], got {loss}")
            alpha = (1.0 - loss) ** (delta / 24.0)
            return alpha, (f"retention {alpha:.6g} per {delta:.4g} h step "
                           f"(from loss_per_24h = {loss:.4g})")
        alpha = 1.0 if self.retention is None else float(self.retention)
        if not 0.0 <= alpha <= 1.0:
            raise ConfigError(f"retention must be in [0, 1], got {alpha}")
        return alpha, f"retention {alpha:.6g} per step"

    def turbine_model(self) -> TurbineModel:
        try:
            return TurbineModel(**self.turbine)
        except TypeError as exc:
            raise ConfigError(f"bad turbine parameters: {exc}") from exc

    def canonical_paths(self) -> tuple[str, str]:
        w = self.canonical_wind or os.path.join(self.output_dir,
                                                WIND_CANONICAL)
        d = self.canonical_demand or os.path.join(self.output_dir,
                                                  DEMAND_CANONICAL)
        return w, d


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """YAML file plus non-None flag overrides; flags win."""
    doc: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                loaded = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} must be a mapping")
        doc = loaded
    unknown = sorted(set(doc) - _CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key, val in overrides.items():
        if val is not None:
            doc[key] = val
    try:
        return RunConfig(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc


class ServiceClient:
    """POSTs to the in-process app, or to --server when given."""

    def __init__(self, server: str | None = None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=600.0)
        else:
            import warnings

            with warnings.catch_warnings():
                # environment-specific httpx shim warning, not actionable
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import app

            self._client = TestClient(app)

    def post(self, path: str, payload: dict) -> dict:
        resp = self._client.post(path, json=payload)
        if resp.status_code >= 400:
            try:
                body = resp.json()
            except ValueError:
                body = {}
            if isinstance(body, dict) and "error_kind" in body:
                from .errors import error_from_kind

                raise error_from_kind(body["error_kind"],
                                      body.get("message", ""))
            if resp.status_code == 422:
                raise SchemaError(f"request rejected: {body.get('detail')}")
            raise BesscapError(
                f"service returned {resp.status_code}: {body}")
        return resp.json()


def _load_pair(cfg: RunConfig) -> tuple[EnergySeries, EnergySeries]:
    wpath, dpath = cfg.canonical_paths()
    _, wind = read_canonical(wpath, "wind")
    _, demand = read_canonical(dpath, "demand")
    return wind, demand


def _series_payload(wind: EnergySeries, demand: EnergySeries) -> dict:
    return {
        "wind_mwh": [float(v) for v in wind.values],
        "demand_mwh": [float(v) for v in demand.values],
        "delta_hours": wind.delta,
    }


def _write_json(path: str, doc: dict, no_timestamp: bool) -> None:
    out = dict(doc)
    if not no_timestamp:
        out["created_at"] = datetime.now(timezone.utc).isoformat()
    with open(path, "w") as fh:
        fh.write(json.dumps(out, sort_keys=True, indent=2))
        fh.write("\n")


def _floats(_ctx, _param, value):
    if value is None:
        return None
    try:
        return [float(v) for v in value.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(),
                      default=None, help="YAML config file.")(fn)
    fn = click.option("--output-dir", default=None,
                      help="Directory for output artifacts.")(fn)
    fn = click.option("--wind", "canonical_wind", default=None,
                      help="Canonical wind CSV (timestamp,mwh_per_step).")(fn)
    fn = click.option("--demand", "canonical_demand", default=None,
                      help="Canonical demand CSV.")(fn)
    fn = click.option("--objective", type=click.Choice(["avg", "peak"]),
                      default=None, help="Alignment objective.")(fn)
    fn = click.option("--engine", type=click.Choice(["lp", "greedy"]),
                      default=None, help="Evaluation engine.")(fn)
    fn = click.option("--hours", type=float, default=None,
                      help="Storage-duration ray B = hours * P.")(fn)
    fn = click.option("--jobs", type=int, default=None,
                      help="Worker threads for surface cells.")(fn)
    fn = click.option("--no-timestamp", "no_timestamp", is_flag=True,
                      default=None,
                      help="Omit created_at from JSON outputs.")(fn)
    fn = click.option("--server", default=None,
                      help="Base URL of a running service; default runs "
                           "in-process.")(fn)
    return fn


@click.group()
def cli() -> None:
    """Battery sizing against wind/demand mismatch."""


@cli.command()
@_common_options
@click.option("--wind-csv", default=None, help="Raw wind-speed CSV.")
@click.option("--demand-csv", default=None, help="Raw demand CSV.")
@click.option("--delta", "delta_hours", type=float, default=None,
              help="Target step in hours (default: native resolution).")
@click.option("--max-gap", "max_gap_steps", type=int, default=None,
              help="Largest hole (in samples) to interpolate over.")
def ingest(config_path, wind_csv, demand_csv, delta_hours, max_gap_steps,
           **flags) -> None:
    """Normalize raw wind and demand CSVs into canonical series files."""
    cfg = load_config(config_path, {**flags,
                                    "wind_csv": wind_csv,
                                    "demand_csv": demand_csv,
                                    "delta_hours": delta_hours,
                                    "max_gap_steps": max_gap_steps})
    if cfg.wind_csv is None or cfg.demand_csv is None:
        raise ConfigError("ingest needs wind_csv and demand_csv")
    wind_raw = read_timed_csv(cfg.wind_csv, cfg.wind_timestamp_column,
                              cfg.wind_value_column, cfg.max_gap_steps)
    demand_raw = read_timed_csv(cfg.demand_csv, cfg.demand_timestamp_column,
                                cfg.demand_value_column, cfg.max_gap_steps)
    delta = cfg.delta_hours
    if delta is None:
        if wind_raw.step_hours != demand_raw.step_hours:
            raise ConfigError(
                f"native steps differ ({wind_raw.step_hours} h vs "
                f"{demand_raw.step_hours} h); set delta_hours")
        delta = wind_raw.step_hours
    if not delta or delta <= 0:
        raise ConfigError("cannot infer a positive step; set delta_hours")
    wind_raw = resample_mean(wind_raw, delta)
    demand_raw = resample_mean(demand_raw, delta)
    wind_raw, demand_raw = align_windows(wind_raw, demand_raw)
    wind = speeds_to_energy(wind_raw.values, cfg.turbine_model(), delta,
                            "wind")
    demand = EnergySeries(demand_raw.values * delta, delta, "demand")
    if cfg.ea_scale:
        demand = scale_to_ea(wind, demand)
    os.makedirs(cfg.output_dir, exist_ok=True)
    wpath, dpath = cfg.canonical_paths()
    write_canonical(wpath, wind_raw.start, wind)
    write_canonical(dpath, demand_raw.start, demand)
    click.echo(f"wrote {wpath} and {dpath}")
    click.echo(f"N = {len(wind)} steps at delta = {delta:.4g} h")
    scaled = " (demand scaled to equal averages)" if cfg.ea_scale else ""
    click.echo(f"w_av = {wind.average_power:.4g} MW, "
               f"d_av = {demand.average_power:.4g} MW{scaled}")


def _surface_payload(cfg: RunConfig, wind: EnergySeries,
                     demand: EnergySeries, alpha: float) -> dict:
    payload = _series_payload(wind, demand)
    payload.update({
        "retention": alpha,
        "objective": cfg.objective,
        "engine": cfg.engine,
        "hours": cfg.hours,
        "jobs": cfg.jobs,
    })
    if cfg.b_grid is not None:
        payload["b_grid_mwh"] = [float(v) for v in cfg.b_grid]
    if cfg.p_grid is not None:
        payload["p_grid_mw"] = [float(v) for v in cfg.p_grid]
    return payload


@cli.command()
@_common_options
@click.option("--b-grid", "b_grid", callback=_floats, default=None,
              help="Comma-separated capacity grid (MWh), starting at 0.")
@click.option("--p-grid", "p_grid", callback=_floats, default=None,
              help="Comma-separated power grid (MW), starting at 0.")
def surface(config_path, b_grid, p_grid, **flags) -> None:
    """Sweep g(B, P) over a grid; write surface.csv and surface.json."""
    from .capacity import AlignmentSurface

    cfg = load_config(config_path, {**flags, "b_grid": b_grid,
                                    "p_grid": p_grid})
    wind, demand = _load_pair(cfg)
    alpha, note = cfg.resolve_retention(wind.delta)
    client = ServiceClient(cfg.server)
    resp = client.post("/surface/sweep",
                       _surface_payload(cfg, wind, demand, alpha))
    surf = AlignmentSurface.from_json_dict(resp)
    os.makedirs(cfg.output_dir, exist_ok=True)
    csv_path = os.path.join(cfg.output_dir, "surface.csv")
    json_path = os.path.join(cfg.output_dir, "surface.json")
    with open(csv_path, "w") as fh:
        fh.write(surf.to_csv())
    _write_json(json_path, surf.to_json_dict(), cfg.no_timestamp)
    click.echo(f"wrote {csv_path} and {json_path}")
    click.echo(f"{note}; objective {surf.objective}, engine {surf.engine}")
    click.echo(f"grid {surf.b_grid.size} x {surf.p_grid.size}; "
               f"g(0,0) = {surf.g00:.4g} MW; "
               f"min g = {float(surf.values.min()):.4g} MW")


@cli.command(name="capacity")
@_common_options
@click.option("--b-grid", "b_grid", callback=_floats, default=None,
              help="Comma-separated capacity grid (MWh), starting at 0.")
@click.option("--target", "target_fraction", type=float, default=None,
              help="Recovery fraction for the efficiency search.")
def capacity_cmd(config_path, b_grid, target_fraction, **flags) -> None:
    """Capacity and incremental capacity along the B = hours*P ray."""
    cfg = load_config(config_path, {**flags, "b_grid": b_grid,
                                    "target_fraction": target_fraction})
    wind, demand = _load_pair(cfg)
    alpha, note = cfg.resolve_retention(wind.delta)
    payload = _surface_payload(cfg, wind, demand, alpha)
    if cfg.target_fraction is not None:
        payload["target_fraction"] = cfg.target_fraction
    client = ServiceClient(cfg.server)
    resp = client.post("/capacity/ray", payload)
    os.makedirs(cfg.output_dir, exist_ok=True)
    csv_path = os.path.join(cfg.output_dir, "capacity.csv")
    cols = ("b_mwh", "p_mw", "g_mw", "kappa_mw", "normalized",
            "incremental_mw_per_mw")
    with open(csv_path, "w") as fh:
        fh.write(",".join(cols) + ",reduced_accuracy\n")
        for row in resp["rows"]:
            vals = ",".join(f"{row[c]:.17g}" for c in cols)
            fh.write(f"{vals},{int(row['reduced_accuracy'])}\n")
    json_path = os.path.join(cfg.output_dir, "capacity.json")
    _write_json(json_path, resp, cfg.no_timestamp)
    click.echo(f"wrote {csv_path} and {json_path}")
    click.echo(f"{note}; ray B = {cfg.hours:.4g} * P; "
               f"g(0,0) = {resp['g00_mw']:.4g} MW")
    eff = resp.get("efficiency")
    if eff is not None:
        click.echo(
            f"recovering {cfg.target_fraction:.4g} of g(0,0) needs "
            f"B = {eff['b_mwh']:.4g} MWh, P = {eff['p_mw']:.4g} MW "
            f"(efficiency {100 * eff['efficiency']:.4g}%)")


@cli.command()
@_common_options
def size(config_path, **flags) -> None:
    """Zero-peaker sizing bounds and the storage-free endpoints."""
    cfg = load_config(config_path, flags)
    wind, demand = _load_pair(cfg)
    client = ServiceClient(cfg.server)
    resp = client.post("/runs/size", _series_payload(wind, demand))
    os.makedirs(cfg.output_dir, exist_ok=True)
    json_path = os.path.join(cfg.output_dir, "size.json")
    _write_json(json_path, resp, cfg.no_timestamp)
    click.echo(f"wrote {json_path}")
    click.echo(f"g_av(0,0) = {resp['g_av00_mw']:.4g} MW, "
               f"g_peak(0,0) = {resp['g_peak00_mw']:.4g} MW")
    click.echo(f"B#_g = {resp['b_sharp_g_mwh']:.4g} MWh "
               "(zero peaker energy)")
    if resp["ea_satisfied"]:
        click.echo(f"B# = {resp['b_sharp_mwh']:.4g} MWh "
                   "(zero peaker and zero spill)")
    else:
        click.echo("B# unavailable: " + (resp.get("ea_message") or
                                         "equal-averages condition fails"))


@cli.command()
@_common_options
@click.option("--b-values", "b_values", callback=_floats, default=None,
              help="Comma-separated capacity ladder (MWh) to compare at.")
def validate(config_path, b_values, **flags) -> None:
    """Cross-check LP, greedy, and the run recursion; exit 10 on drift."""
    cfg = load_config(config_path, {**flags, "b_values": b_values})
    wind, demand = _load_pair(cfg)
    payload = _series_payload(wind, demand)
    if cfg.b_values is not None:
        payload["b_values_mwh"] = [float(v) for v in cfg.b_values]
    client = ServiceClient(cfg.server)
    resp = client.post("/validate", payload)
    os.makedirs(cfg.output_dir, exist_ok=True)
    json_path = os.path.join(cfg.output_dir, "validation.json")
    _write_json(json_path, resp, cfg.no_timestamp)
    click.echo(f"wrote {json_path}")
    click.echo(f"compared {len(resp['rows'])} capacities; "
               f"max relative difference {resp['max_rel_diff']:.4g}")
    if not resp["passed"]:
        raise ToleranceError(
            f"engines disagree: max relative difference "
            f"{resp['max_rel_diff']:.6g} exceeds {resp['tolerance']:g}")
    click.echo("PASS: lp, greedy, and dp agree within "
               f"{resp['tolerance']:g}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except BesscapError as exc:
        click.echo(f"error ({exc.kind}): {exc}", err=True)
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        return 130
    return 0


if __name__ == "__main__":
    sys.exit(main())
