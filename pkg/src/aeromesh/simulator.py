"""Tick-based replay of a scenario with adaptation triggers and migrations.

Each tick moves the application UAVs along their waypoints, drains energy,
scores every session with the referee and checks the triggers. A trigger is
answered by re-solving yaws if that is enough, otherwise by a full replan
whose relay moves are scheduled by the migration planner. Sessions touched by
a migration deliver nothing until it ends.
"""
from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field, replace

from .core_types import NetworkConfig, PolarPos, Role, Session, UavState, from_cartesian, planar_distance
from .dcr_planner import PlannerOptions, plan, plan_multi_gs, reorient_only, split_sessions
from .errors import Infeasible, ScenarioInvalid
from .formats import config_to_dict, pos_to_dict, rnd
from .link_model import LinkModelParams
from .migration_planner import Matching, build_plan, color_graph, conflict_graph, m2bm, verify_plan
from .routing_eval import evaluate

EVENT_KINDS = ("Tick", "TriggerSatisfaction", "TriggerEnergy", "TriggerRetask", "ReorientOnly",
               "Replan", "MigrationStart", "MigrationEnd", "UavSwap")

# idle relays wait in a row of parking slots next to the first ground station
DEPOT_SPACING = 10.0


@dataclass(frozen=True)
class SessionSpec:
    """A session whose demand is piecewise constant: ``schedule`` holds (start s, Mbps)."""

    id: str
    app_uav: str
    schedule: tuple[tuple[float, float], ...]

    def demand_at(self, t: float) -> float:
        current = self.schedule[0][1]
        for start, mbps in self.schedule:
            if start <= t:
                current = mbps
            else:
                break
        return current


@dataclass
class Scenario:
    model: LinkModelParams
    gs_candidates: list[PolarPos]
    sessions: list[SessionSpec]
    # per app UAV: (time s, position) waypoints, linearly interpolated
    trajectories: dict[str, list[tuple[float, PolarPos]]]
    th_a: float = 0.75
    th_e: float = 0.2
    uav_speed: float = 5.0
    tick: float = 1.0
    duration: float = 300.0
    relay_radios: int = 3
    seed: int = 0
    gs_radios: int = 3
    app_radios: int = 3
    endurance: float = 1200.0
    swap_dead_time: float = 0.0
    hysteresis: int = 3
    d_min: float = 5.0
    dz: float = 10.0
    # (time s, app UAV id) at which the app is handed a new task
    retasks: list[tuple[float, str]] = field(default_factory=list)
    id: str = "scenario"

    def validate(self) -> None:
        def bad(msg):
            raise ScenarioInvalid(msg)

        if not self.gs_candidates:
            bad("at least one ground-station candidate is required")
        if not self.sessions:
            bad("at least one session is required")
        for name in ("th_a", "th_e"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                bad(f"{name} must lie in (0, 1], got {v}")
        for name in ("uav_speed", "tick", "endurance", "dz"):
            if not getattr(self, name) > 0:
                bad(f"{name} must be > 0")
        if self.duration < 0 or self.swap_dead_time < 0 or self.d_min < 0:
            bad("duration, swap_dead_time and d_min must be >= 0")
        if self.dz < self.d_min:
            bad("altitude layers closer than d_min cannot separate crossing legs")
        if self.relay_radios < 2 or self.gs_radios < 1 or self.app_radios < 1:
            bad("relays need at least 2 radios, other UAVs at least 1")
        if self.hysteresis < 1:
            bad("hysteresis must be >= 1 tick")
        ids = [s.id for s in self.sessions]
        if len(set(ids)) != len(ids):
            bad("session ids must be unique")
        for s in self.sessions:
            if s.app_uav not in self.trajectories:
                bad(f"session {s.id}: app UAV {s.app_uav} has no trajectory")
            if not s.schedule:
                bad(f"session {s.id}: empty demand schedule")
            times = [t for t, _ in s.schedule]
            if any(b <= a for a, b in zip(times, times[1:])):
                bad(f"session {s.id}: schedule times must be strictly increasing")
            if any(not mbps > 0 for _, mbps in s.schedule):
                bad(f"session {s.id}: demands must be > 0")
        for app, points in self.trajectories.items():
            if not points:
                bad(f"trajectory of {app} is empty")
            times = [t for t, _ in points]
            if any(b <= a for a, b in zip(times, times[1:])):
                bad(f"trajectory of {app}: waypoint times must be strictly increasing")
        for t, app in self.retasks:
            if app not in self.trajectories:
                bad(f"retask names unknown app UAV {app}")

    def gs_id(self, k: int) -> str:
        return f"GS{k}"

    def position(self, app: str, t: float) -> PolarPos:
        points = self.trajectories[app]
        if t <= points[0][0]:
            return points[0][1]
        for (t0, p0), (t1, p1) in zip(points, points[1:]):
            if t <= t1:
                f = (t - t0) / (t1 - t0)
                (x0, y0), (x1, y1) = p0.xy, p1.xy
                return from_cartesian(x0 + f * (x1 - x0), y0 + f * (y1 - y0), p0.altitude)
        return points[-1][1]


@dataclass(frozen=True)
class TraceEvent:
    time: float
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {"t": rnd(self.time), "kind": self.kind, "payload": self.payload}


@dataclass
class _Migration:
    end: float
    affected: frozenset


@dataclass
class SimState:
    time: float
    cfg: NetworkConfig
    gs_ids: list[str]
    energy: dict[str, float]
    lambdas: dict[str, float] = field(default_factory=dict)
    low_ticks: int = 0
    retask_due: bool = False
    migration: _Migration | None = None
    # uav id -> time its replacement arrives
    swapping: dict[str, float] = field(default_factory=dict)
    next_relay: int = 0
    swaps: int = 0


@dataclass
class RunMetrics:
    mean_throughput: dict[str, float]
    mean_satisfaction: float
    min_lambda: float
    median_lambda: float
    mean_relays: float
    max_relays: int
    relay_timeline: list[tuple[float, int]]
    replans: int
    reorients: int
    migrations: int
    downtime_s: float
    makespan_s: float
    swaps: int

    def to_dict(self) -> dict:
        return {
            "mean_throughput": {k: rnd(v) for k, v in sorted(self.mean_throughput.items())},
            "mean_satisfaction": rnd(self.mean_satisfaction),
            "min_lambda": rnd(self.min_lambda),
            "median_lambda": rnd(self.median_lambda),
            "mean_relays": rnd(self.mean_relays),
            "max_relays": self.max_relays,
            "relay_timeline": [[rnd(t), n] for t, n in self.relay_timeline],
            "replans": self.replans,
            "reorients": self.reorients,
            "migrations": self.migrations,
            "downtime_s": rnd(self.downtime_s),
            "makespan_s": rnd(self.makespan_s),
            "swaps": self.swaps,
        }


# ---------------------------------------------------------------- triggers and energy

def check_triggers(state: SimState, scn: Scenario) -> str | None:
    """Highest-priority trigger due now: energy, then retask, then satisfaction.

    Satisfaction fires only after ``scn.hysteresis`` consecutive ticks with
    some session below ``th_a`` (``state.low_ticks`` counts them).
    """
    if any(state.energy.get(u, 1.0) < scn.th_e for u in state.cfg.uavs):
        return "TriggerEnergy"
    if state.retask_due:
        return "TriggerRetask"
    if state.low_ticks >= scn.hysteresis and any(l < scn.th_a for l in state.lambdas.values()):
        return "TriggerSatisfaction"
    return None


def energy_step(state: SimState, tick: float, scn: Scenario) -> SimState:
    """Drain ``tick / endurance`` from every deployed UAV; parked spares keep their charge."""
    drain = tick / scn.endurance
    for u in state.cfg.uavs:
        state.energy[u] = max(0.0, state.energy.get(u, 1.0) - drain)
    return state


def _swap_depleted(state: SimState, scn: Scenario, t: float, trace: list[TraceEvent]) -> None:
    gs = state.cfg.uavs[state.gs_ids[0]].pos
    for u in sorted(state.cfg.uavs):
        if state.energy.get(u, 1.0) >= scn.th_e:
            continue
        state.swaps += 1
        pos = state.cfg.uavs[u].pos
        ready = t + planar_distance(gs, pos) / scn.uav_speed + scn.swap_dead_time
        state.swapping[u] = ready
        state.energy[u] = 1.0
        trace.append(TraceEvent(t, "UavSwap", {
            "uav": u, "replacement": f"{u}#{state.swaps}", "pos": pos_to_dict(pos), "ready_at": rnd(ready)}))


# ---------------------------------------------------------------- planning helpers

def _sessions_at(scn: Scenario, t: float, gs_ids: list[str]) -> list[Session]:
    base = [Session(s.id, s.app_uav, s.demand_at(t), gs_ids[0]) for s in sorted(scn.sessions, key=lambda s: s.id)]
    return split_sessions(base, gs_ids) if len(gs_ids) > 1 else base


def _rename(cfg: NetworkConfig, mapping: dict[str, str]) -> NetworkConfig:
    m = lambda u: mapping.get(u, u)
    uavs = {m(k): replace(u, id=m(k)) for k, u in cfg.uavs.items()}
    routes = {sid: tuple(m(u) for u in path) for sid, path in cfg.routes.items()}
    shares = {(m(u), m(v)): s for (u, v), s in cfg.shares.items()}
    return NetworkConfig(uavs, routes, shares, cfg.lam)


def _depot(gs: PolarPos, k: int) -> tuple[float, float]:
    x, y = gs.xy
    return (x, y - DEPOT_SPACING * (k + 1))


def _options(scn: Scenario) -> PlannerOptions:
    return PlannerOptions(relay_radios=scn.relay_radios)


def _plan(scn: Scenario, state_cfg: NetworkConfig | None, apps: dict[str, UavState], t: float):
    stations = []
    for k, pos in enumerate(scn.gs_candidates):
        gid = scn.gs_id(k)
        if state_cfg is not None and gid in state_cfg.uavs:
            stations.append(state_cfg.uavs[gid])
        else:
            stations.append(UavState(gid, Role.GROUND_STATION, pos, 0.0, scn.gs_radios))
    if len(stations) == 1:
        sessions = _sessions_at(scn, t, [stations[0].id])
        return plan(sessions, apps, stations[0], scn.model, _options(scn)), [stations[0].id]
    result = plan_multi_gs(_sessions_at(scn, t, [stations[0].id]), apps, stations, scn.model, _options(scn))
    return result.config, list(result.gs_ids)


def _current_apps(scn: Scenario, cfg: NetworkConfig | None, t: float) -> dict[str, UavState]:
    apps = {}
    for app in sorted(scn.trajectories):
        pos = scn.position(app, t)
        if cfg is not None and app in cfg.uavs:
            apps[app] = cfg.uavs[app].moved(pos=pos)
        else:
            apps[app] = UavState(app, Role.APPLICATION, pos, 0.0, scn.app_radios)
    return apps


def _fresh_relay(state: SimState) -> str:
    rid = f"relay{state.next_relay}"
    state.next_relay += 1
    return rid


def plan_transition(old: NetworkConfig, new: NetworkConfig, depot_at: PolarPos, fresh_id,
                    d_min: float = 5.0, dz: float = 10.0, speed: float = 5.0):
    """Schedule the move from ``old`` to ``new``.

    Relays are interchangeable: old relays are matched to new relay spots by
    min-max matching, with spares launched from or parked at depot slots next
    to ``depot_at``. Other UAVs keep their identity and fly their own leg
    (usually of zero length) and are held at the operating altitude when
    possible. ``fresh_id()`` names launched relays.

    Returns the new config with relays renamed to the physical UAVs that
    occupy them, the migration plan and the sessions it disrupts.
    """
    old_ids = [u.id for u in old.relays]
    new_ids = [u.id for u in new.relays]
    old_xy = [old.uavs[u].pos.xy for u in old_ids]
    new_xy = [new.uavs[u].pos.xy for u in new_ids]
    extra = len(new_ids) - len(old_ids)
    old_xy += [_depot(depot_at, k) for k in range(max(0, extra))]
    new_xy += [_depot(depot_at, k) for k in range(max(0, -extra))]

    mapping: dict[str, str] = {}
    relay_pairs: list = []
    relay_ids: list[str] = []
    if old_xy:
        matching = m2bm(old_xy, new_xy)
        for i, j in enumerate(matching.assignment):
            physical = old_ids[i] if i < len(old_ids) else fresh_id()
            if j < len(new_ids):
                mapping[new_ids[j]] = physical
            relay_pairs.append(matching.pairs[i])
            relay_ids.append(physical)
    renamed = _rename(new, mapping)

    others = sorted(u for u in renamed.uavs if renamed.uavs[u].role != Role.RELAY)
    pairs = relay_pairs + [((old.uavs[u] if u in old.uavs else renamed.uavs[u]).pos.xy, renamed.uavs[u].pos.xy)
                           for u in others]
    ids = relay_ids + others
    longest = max((math.dist(a, b) for a, b in relay_pairs), default=0.0)
    combined = Matching(pairs, longest, tuple(range(len(pairs))))
    # UAVs that are not relocated hold the operating altitude
    coloring = color_graph(conflict_graph(combined, d_min), level=range(len(relay_pairs), len(pairs)))
    mplan = build_plan(combined, coloring, dz, speed, uav_ids=ids)

    moving = {leg.uav for leg in mplan.assignments if leg.planar_length > 0 or leg.layer != 0}
    affected = set()
    for sid in set(renamed.routes) | set(old.routes):
        old_path = old.routes.get(sid, ())
        new_path = renamed.routes.get(sid, ())
        if old_path != new_path or moving & (set(old_path) | set(new_path)):
            affected.add(sid)
    return renamed, mplan, frozenset(affected)


def _plan_payload(mplan) -> dict:
    return {
        "makespan_s": rnd(mplan.makespan),
        "legs": [{"uav": l.uav, "from": [rnd(l.old[0]), rnd(l.old[1])], "to": [rnd(l.new[0]), rnd(l.new[1])],
                  "layer": l.layer, "altitude_m": rnd(l.altitude)} for l in mplan.assignments],
    }


# ---------------------------------------------------------------- main loop

def run(scn: Scenario) -> tuple[list[TraceEvent], RunMetrics]:
    scn.validate()
    p = scn.model
    trace: list[TraceEvent] = []

    apps = _current_apps(scn, None, 0.0)
    cfg, gs_ids = _plan(scn, None, apps, 0.0)
    state = SimState(0.0, NetworkConfig({}), gs_ids, {})
    mapping = {u.id: _fresh_relay(state) for u in cfg.relays}
    state.cfg = _rename(cfg, mapping)
    state.energy = {u: 1.0 for u in sorted(state.cfg.uavs)}
    trace.append(TraceEvent(0.0, "Replan", {"reason": "initial", "status": "ok", "moved": False,
                                            "relays": state.cfg.relay_count, "config": config_to_dict(state.cfg)}))

    retask_times = sorted(scn.retasks)
    steps = int(math.floor(scn.duration / scn.tick + 1e-9))
    delivered: dict[str, float] = {}
    offered: dict[str, float] = {}
    lam_samples: list[float] = []
    relay_timeline = [(0.0, state.cfg.relay_count)]
    relay_samples = []
    replans = reorients = migrations = 0
    downtime = makespan_total = 0.0

    for k in range(steps + 1):
        t = k * scn.tick
        state.time = t
        mig = state.migration
        if mig is not None and mig.end <= t + 1e-9:
            trace.append(TraceEvent(mig.end, "MigrationEnd", {"relays": state.cfg.relay_count}))
            state.migration = None
        for u, ready in list(state.swapping.items()):
            if ready <= t + 1e-9:
                del state.swapping[u]

        # move application UAVs and refresh demands
        for app, pos in ((a, scn.position(a, t)) for a in sorted(scn.trajectories)):
            if app in state.cfg.uavs:
                state.cfg.uavs[app] = state.cfg.uavs[app].moved(pos=pos)
        if k > 0:
            energy_step(state, scn.tick, scn)
        sessions = _sessions_at(scn, t, state.gs_ids)
        report = evaluate(state.cfg, sessions, p, check=False)
        down = set(state.migration.affected) if state.migration else set()
        for u in state.swapping:
            down |= state.cfg.sessions_through(u)
        lambdas = {s.id: (0.0 if s.id in down else report.per_session_lambda[s.id]) for s in sessions}
        state.lambdas = {sid: lam for sid, lam in lambdas.items() if sid not in down}
        for s in sessions:
            delivered[s.id] = delivered.get(s.id, 0.0) + min(lambdas[s.id], 1.0) * s.demand * scn.tick
            offered[s.id] = offered.get(s.id, 0.0) + s.demand * scn.tick
        lam_samples.extend(lambdas.values())
        relay_samples.append(state.cfg.relay_count)
        trace.append(TraceEvent(t, "Tick", {"lambda": {sid: rnd(l) for sid, l in sorted(lambdas.items())},
                                            "relays": state.cfg.relay_count}))

        while retask_times and retask_times[0][0] <= t + 1e-9:
            retask_times.pop(0)
            state.retask_due = True
        if state.migration is not None:
            continue
        if any(l < scn.th_a for l in state.lambdas.values()):
            state.low_ticks += 1
        else:
            state.low_ticks = 0

        trigger = check_triggers(state, scn)
        if trigger is None:
            continue
        trace.append(TraceEvent(t, trigger, {"lambda": {sid: rnd(l) for sid, l in sorted(lambdas.items())}}))
        if trigger == "TriggerEnergy":
            _swap_depleted(state, scn, t, trace)
            continue
        state.retask_due = False
        state.low_ticks = 0

        fixed = reorient_only(state.cfg, sessions, p, _options(scn))
        if fixed is not None:
            reorients += 1
            state.cfg = fixed
            trace.append(TraceEvent(t, "ReorientOnly", {"config": config_to_dict(fixed)}))
            continue

        replans += 1
        try:
            new, new_gs = _plan(scn, state.cfg, _current_apps(scn, state.cfg, t), t)
        except Infeasible as e:
            trace.append(TraceEvent(t, "Replan", {"reason": trigger, "status": "infeasible", "detail": str(e)}))
            continue
        state.gs_ids = new_gs
        depot_at = new.uavs[state.gs_ids[0]].pos
        renamed, mplan, affected = plan_transition(state.cfg, new, depot_at, lambda: _fresh_relay(state),
                                                   scn.d_min, scn.dz, scn.uav_speed)
        for u in [u for u in state.energy if u not in renamed.uavs]:
            del state.energy[u]
        for u in sorted(renamed.uavs):
            state.energy.setdefault(u, 1.0)
        state.cfg = renamed
        moved = mplan.makespan > 0
        trace.append(TraceEvent(t, "Replan", {"reason": trigger, "status": "ok", "moved": moved,
                                              "relays": renamed.relay_count, "config": config_to_dict(renamed)}))
        if relay_timeline[-1][1] != renamed.relay_count:
            relay_timeline.append((t, renamed.relay_count))
        if moved:
            migrations += 1
            downtime += mplan.makespan
            makespan_total += mplan.makespan
            state.migration = _Migration(t + mplan.makespan, affected)
            payload = _plan_payload(mplan)
            payload["affected"] = sorted(affected)
            payload["verified"] = verify_plan(mplan, scn.d_min, min(scn.tick, 0.5))
            trace.append(TraceEvent(t, "MigrationStart", payload))

    if state.migration is not None:
        trace.append(TraceEvent(state.migration.end, "MigrationEnd", {"relays": state.cfg.relay_count}))

    duration = max(scn.tick * (steps + 1), 1e-12)
    metrics = RunMetrics(
        mean_throughput={sid: v / duration for sid, v in sorted(delivered.items())},
        mean_satisfaction=sum(delivered.values()) / sum(offered.values()) if offered else 1.0,
        min_lambda=min(lam_samples, default=math.inf),
        median_lambda=statistics.median(lam_samples) if lam_samples else math.inf,
        mean_relays=sum(relay_samples) / len(relay_samples) if relay_samples else 0.0,
        max_relays=max(relay_samples, default=0),
        relay_timeline=relay_timeline,
        replans=replans,
        reorients=reorients,
        migrations=migrations,
        downtime_s=downtime,
        makespan_s=makespan_total,
        swaps=state.swaps,
    )
    return trace, metrics
