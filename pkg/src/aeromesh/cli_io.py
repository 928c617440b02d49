"""Scenario files, the zone generator, metric tables and trace records.

Files are JSON with explicit units: degrees, metres, Mbps, seconds.
"""
from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, fields as dc_fields
from typing import IO, Any, Callable, Sequence

import numpy as np

from . import baselines
from .core_types import NetworkConfig, PolarPos, Role, Session, UavState
from .dcr_planner import PlannerOptions, plan
from .errors import Infeasible, ParseError
from .formats import SCHEMA_VERSION, dumps, expect, fields, loads, number, pos_from_dict
from .link_model import LinkModelParams, default_params
from .routing_eval import evaluate
from .simulator import Scenario, SessionSpec, TraceEvent

METRICS_HEADER = ("scenario_id", "algorithm", "relays", "min_lambda", "median_lambda", "satisfaction",
                  "migrations", "downtime_s", "makespan_s")

# scalar scenario knobs: file key -> (attribute, parser)
_SCALARS: dict[str, tuple[str, str]] = {
    "th_a": ("th_a", "number"),
    "th_e": ("th_e", "number"),
    "uav_speed_mps": ("uav_speed", "number"),
    "tick_s": ("tick", "number"),
    "duration_s": ("duration", "number"),
    "relay_radios": ("relay_radios", "int"),
    "gs_radios": ("gs_radios", "int"),
    "app_radios": ("app_radios", "int"),
    "endurance_s": ("endurance", "number"),
    "swap_dead_time_s": ("swap_dead_time", "number"),
    "hysteresis_ticks": ("hysteresis", "int"),
    "d_min_m": ("d_min", "number"),
    "dz_m": ("dz", "number"),
    "seed": ("seed", "int"),
}


# ---------------------------------------------------------------- link model

def model_to_dict(p: LinkModelParams) -> dict:
    return {"a": p.a, "b": p.b, "c": p.c, "d": p.d, "e": p.e, "f": p.f,
            "conn_threshold": p.conn_threshold, "rate_cap": p.rate_cap,
            "max_fov_deg": math.degrees(p.max_fov), "combine": p.combine}


def model_from_dict(obj: Any, path: str = "$") -> LinkModelParams:
    fields(obj, path, ("a", "b", "c", "d", "e", "f"), ("conn_threshold", "rate_cap", "max_fov_deg", "combine"))
    kw = {k: number(obj[k], f"{path}.{k}") for k in ("a", "b", "c", "d", "e", "f")}
    for k in ("conn_threshold", "rate_cap"):
        if k in obj:
            kw[k] = number(obj[k], f"{path}.{k}")
    if "max_fov_deg" in obj:
        kw["max_fov"] = math.radians(number(obj["max_fov_deg"], f"{path}.max_fov_deg"))
    if "combine" in obj:
        kw["combine"] = expect(obj["combine"], str, f"{path}.combine")
    try:
        return LinkModelParams(**kw)
    except ValueError as e:
        raise ParseError(str(e), path) from None


def load_model(path: str) -> LinkModelParams:
    with open(path) as fh:
        return model_from_dict(loads(fh.read(), path), "$")


# ---------------------------------------------------------------- scenarios

def _full(p: PolarPos) -> dict:
    # scenario files keep full precision so they round-trip
    return {"r_m": p.r, "theta_deg": math.degrees(p.theta), "alt_m": p.altitude}


def scenario_to_dict(scn: Scenario) -> dict:
    out: dict = {
        "schema_version": SCHEMA_VERSION,
        "id": scn.id,
        "model": model_to_dict(scn.model),
        "gs_candidates": [_full(p) for p in scn.gs_candidates],
        "sessions": [{"id": s.id, "app_uav": s.app_uav, "schedule_mbps": [[t, d] for t, d in s.schedule]}
                     for s in scn.sessions],
        "trajectories": {app: [[t, _full(p)] for t, p in pts] for app, pts in sorted(scn.trajectories.items())},
        "retasks": [[t, app] for t, app in scn.retasks],
    }
    for key, (attr, _) in _SCALARS.items():
        out[key] = getattr(scn, attr)
    return out


def scenario_from_dict(obj: Any, path: str = "$") -> Scenario:
    required = ("schema_version", "gs_candidates", "sessions", "trajectories")
    optional = ("id", "model", "retasks") + tuple(_SCALARS)
    fields(obj, path, required, optional)
    if obj["schema_version"] != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {obj['schema_version']!r}", f"{path}.schema_version")
    model = model_from_dict(obj["model"], f"{path}.model") if "model" in obj else default_params()
    gs = [pos_from_dict(g, f"{path}.gs_candidates[{k}]")
          for k, g in enumerate(expect(obj["gs_candidates"], list, f"{path}.gs_candidates"))]

    sessions = []
    for k, item in enumerate(expect(obj["sessions"], list, f"{path}.sessions")):
        where = f"{path}.sessions[{k}]"
        fields(item, where, ("id", "app_uav", "schedule_mbps"))
        schedule = []
        for i, step in enumerate(expect(item["schedule_mbps"], list, f"{where}.schedule_mbps")):
            at = f"{where}.schedule_mbps[{i}]"
            if not isinstance(step, list) or len(step) != 2:
                raise ParseError("expected [time_s, mbps]", at)
            schedule.append((number(step[0], f"{at}[0]"), number(step[1], f"{at}[1]")))
        sessions.append(SessionSpec(expect(item["id"], str, f"{where}.id"),
                                    expect(item["app_uav"], str, f"{where}.app_uav"), tuple(schedule)))

    trajectories = {}
    for app, pts in expect(obj["trajectories"], dict, f"{path}.trajectories").items():
        where = f"{path}.trajectories.{app}"
        waypoints = []
        for i, wp in enumerate(expect(pts, list, where)):
            at = f"{where}[{i}]"
            if not isinstance(wp, list) or len(wp) != 2:
                raise ParseError("expected [time_s, position]", at)
            waypoints.append((number(wp[0], f"{at}[0]"), pos_from_dict(wp[1], f"{at}[1]")))
        trajectories[app] = waypoints

    retasks = []
    for i, item in enumerate(expect(obj.get("retasks", []), list, f"{path}.retasks")):
        at = f"{path}.retasks[{i}]"
        if not isinstance(item, list) or len(item) != 2:
            raise ParseError("expected [time_s, app_uav]", at)
        retasks.append((number(item[0], f"{at}[0]"), expect(item[1], str, f"{at}[1]")))

    kw = {}
    for key, (attr, kind) in _SCALARS.items():
        if key in obj:
            kw[attr] = expect(obj[key], int, f"{path}.{key}") if kind == "int" else number(obj[key], f"{path}.{key}")
    return Scenario(model, gs, sessions, trajectories, retasks=retasks,
                    id=expect(obj.get("id", "scenario"), str, f"{path}.id"), **kw)


def dump_scenario(scn: Scenario) -> str:
    return dumps(scenario_to_dict(scn)) + "\n"


def parse_scenario(text: str, source: str = "$") -> Scenario:
    return scenario_from_dict(loads(text, source))


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        return parse_scenario(fh.read(), path)


def static_instance(scn: Scenario, t: float = 0.0) -> tuple[list[Session], dict[str, UavState], UavState]:
    """Sessions, app UAVs and the first ground station of a scenario at time ``t``."""
    gs = UavState(scn.gs_id(0), Role.GROUND_STATION, scn.gs_candidates[0], 0.0, scn.gs_radios)
    apps = {a: UavState(a, Role.APPLICATION, scn.position(a, t), 0.0, scn.app_radios) for a in sorted(scn.trajectories)}
    sessions = [Session(s.id, s.app_uav, s.demand_at(t), gs.id) for s in sorted(scn.sessions, key=lambda s: s.id)]
    return sessions, apps, gs


# ---------------------------------------------------------------- generator

def gs_radio_count(sessions: Sequence[Session], apps: dict[str, UavState], pos: PolarPos,
                   p: LinkModelParams, relay_radios: int = 3, max_radios: int = 36) -> int:
    """Fewest GS radios (at least 3) whose sectors can each carry their whole demand.

    Falls back to ``max_radios`` if no count up to it suffices.
    """
    opt = PlannerOptions(relay_radios=relay_radios)
    for m in range(3, max_radios + 1):
        gs = UavState("GS0", Role.GROUND_STATION, pos, 0.0, m)
        if baselines.gs_headroom(sessions, apps, gs, p, opt) >= 1.0:
            return m
    return max_radios


def generate_zones(num_zones: int, apps_per_zone: int, runs_per_zone: int, seed: int,
                   radius: float = 1000.0, model: LinkModelParams | None = None,
                   duration: float = 60.0) -> list[Scenario]:
    """Static scenarios: one GS at the zone centre, apps uniform over the zone disc.

    Demands are uniform in [100, 1000] Mbps. Each (zone, run) draws from its own
    stream seeded by ``(seed, zone, run)``.
    """
    if min(num_zones, apps_per_zone, runs_per_zone) < 1:
        raise ValueError("zone, app and run counts must be >= 1")
    if not radius > 0:
        raise ValueError("radius must be > 0")
    p = model or default_params()
    centre = PolarPos(0.0, 0.0)
    out = []
    for zone in range(num_zones):
        for run in range(runs_per_zone):
            rng = np.random.default_rng(np.random.SeedSequence([seed, zone, run]))
            r = radius * np.sqrt(rng.random(apps_per_zone))
            theta = 2.0 * math.pi * rng.random(apps_per_zone)
            demand = rng.uniform(100.0, 1000.0, apps_per_zone)
            trajectories = {f"A{k:02d}": [(0.0, PolarPos(float(r[k]), float(theta[k])))]
                            for k in range(apps_per_zone)}
            specs = [SessionSpec(f"s{k:02d}", f"A{k:02d}", ((0.0, float(demand[k])),)) for k in range(apps_per_zone)]
            scn = Scenario(p, [centre], specs, trajectories, duration=duration, relay_radios=3, app_radios=3,
                           seed=seed, id=f"z{zone:02d}-k{apps_per_zone:02d}-r{run:02d}")
            sessions, apps, _ = static_instance(scn)
            scn.gs_radios = gs_radio_count(sessions, apps, centre, p, scn.relay_radios)
            out.append(scn)
    return out


# ---------------------------------------------------------------- metrics

@dataclass(frozen=True)
class MetricsRow:
    scenario_id: str
    algorithm: str
    relays: float
    min_lambda: float
    median_lambda: float
    satisfaction: float
    migrations: int = 0
    downtime_s: float = 0.0
    makespan_s: float = 0.0


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf"
        return f"{v:.6f}"
    return str(v)


def write_metrics(rows: Sequence[MetricsRow], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for row in rows:
        w.writerow([_cell(getattr(row, f.name)) for f in dc_fields(MetricsRow)])


def metrics_csv(rows: Sequence[MetricsRow]) -> str:
    buf = io.StringIO()
    write_metrics(rows, buf)
    return buf.getvalue()


def read_metrics(text: str) -> list[dict[str, str]]:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader, ()))
    if header != METRICS_HEADER:
        raise ParseError(f"unexpected metrics header {header!r}", "$[0]")
    return [dict(zip(METRICS_HEADER, r)) for r in reader]


Planner = Callable[..., NetworkConfig]


def algorithms() -> dict[str, Planner]:
    """Planner name -> function taking (sessions, apps, gs, params, options)."""
    table: dict[str, Planner] = {"dcr": plan}
    table.update(baselines.ALGORITHMS)
    return table


def compare(scenarios: Sequence[Scenario], names: Sequence[str] | None = None) -> list[MetricsRow]:
    """One row per (scenario, algorithm) from the static instance at t = 0.

    A planner that reports the scenario infeasible gets ``nan`` in every column.
    """
    table = algorithms()
    names = list(names) if names else list(table)
    for n in names:
        if n not in table:
            raise ValueError(f"unknown algorithm {n!r}; choose from {sorted(table)}")
    rows = []
    for scn in scenarios:
        sessions, apps, gs = static_instance(scn)
        opt = PlannerOptions(relay_radios=scn.relay_radios)
        for name in names:
            try:
                cfg = table[name](sessions, apps, gs, scn.model, opt)
            except Infeasible:
                nan = float("nan")
                rows.append(MetricsRow(scn.id, name, nan, nan, nan, nan))
                continue
            report = evaluate(cfg, sessions, scn.model)
            lams = list(report.per_session_lambda.values())
            rows.append(MetricsRow(scn.id, name, cfg.relay_count, report.min_lambda,
                                   statistics.median(lams), report.satisfaction()))
    return rows


# ---------------------------------------------------------------- traces

def trace_lines(events: Sequence[TraceEvent]) -> str:
    """Newline-delimited records, one event per line, each tagged with the schema version."""
    return "".join(dumps({"v": SCHEMA_VERSION, **e.to_dict()}) + "\n" for e in events)


def read_trace(text: str) -> list[TraceEvent]:
    out = []
    for i, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        rec = loads(line, f"$[{i}]")
        fields(rec, f"$[{i}]", ("v", "t", "kind", "payload"))
        if rec["v"] != SCHEMA_VERSION:
            raise ParseError(f"unsupported schema version {rec['v']!r}", f"$[{i}].v")
        out.append(TraceEvent(number(rec["t"], f"$[{i}].t"), expect(rec["kind"], str, f"$[{i}].kind"),
                              expect(rec["payload"], dict, f"$[{i}].payload")))
    return out

