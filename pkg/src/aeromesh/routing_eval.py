"""Feasibility and satisfaction referee for a :class:`NetworkConfig`.

Shares are half-duplex: a link-flow consumes airtime on the serving radio at
both of its endpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from .core_types import NetworkConfig, Role, Session, edge_key, planar_distance
from .errors import CoincidentPositions, DisconnectedRoute, UnknownSession
from .link_model import LinkModelParams, link_capacity, serving_radio
from .core_types import bearing

SHARE_TOL = 1e-9

STRUCTURAL_KINDS = frozenset({
    "MissingRoute", "UnknownUav", "BadEndpoints", "NonSimplePath", "ShareOverflow",
})


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str
    subject: tuple = ()


@dataclass
class SatisfactionReport:
    per_session_lambda: dict[str, float]
    min_lambda: float
    radio_utilization: dict[tuple[str, int], float]
    violations: list[Violation]
    demands: dict[str, float] = field(default_factory=dict)
    shares: dict[tuple[str, str], float] = field(default_factory=dict)

    def satisfaction(self) -> float:
        """Delivered traffic over offered traffic, each session capped at its demand."""
        total = sum(self.demands.values())
        if total == 0:
            return 1.0
        got = sum(min(self.per_session_lambda[s], 1.0) * t for s, t in self.demands.items())
        return got / total


def structural(violations: Iterable[Violation]) -> list[Violation]:
    return [v for v in violations if v.kind in STRUCTURAL_KINDS]


def _radio_of(cfg: NetworkConfig, u: str, v: str) -> int:
    return serving_radio(cfg.uavs[u], bearing(cfg.uavs[u].pos, cfg.uavs[v].pos))


def _route_problems(cfg: NetworkConfig, s: Session) -> list[Violation]:
    path = cfg.routes.get(s.id)
    if path is None:
        return [Violation("MissingRoute", f"session {s.id} has no route", (s.id,))]
    out = []
    missing = [u for u in path if u not in cfg.uavs]
    if missing:
        out.append(Violation("UnknownUav", f"route {s.id} names unknown UAVs {missing}", (s.id,)))
    if not path or path[0] != s.app_uav or path[-1] != s.gs:
        out.append(Violation("BadEndpoints", f"route {s.id} must run {s.app_uav} -> {s.gs}", (s.id,)))
    if len(set(path)) != len(path):
        out.append(Violation("NonSimplePath", f"route {s.id} repeats a UAV", (s.id,)))
    return out


def validate(cfg: NetworkConfig, sessions: Iterable[Session], p: LinkModelParams,
             lam: float | None = None) -> list[Violation]:
    """All constraint violations of ``cfg``; an empty list means feasible at ``lam``."""
    lam = cfg.lam if lam is None else lam
    sessions = list(sessions)
    violations: list[Violation] = []
    usable = {}
    for s in sessions:
        problems = _route_problems(cfg, s)
        violations.extend(problems)
        if not any(v.kind in ("UnknownUav", "MissingRoute") for v in problems):
            usable[s.id] = s

    loads: dict[tuple[str, str], float] = {}
    for sid, s in usable.items():
        path = cfg.routes[sid]
        for u, v in zip(path, path[1:]):
            key = edge_key(u, v)
            loads[key] = loads.get(key, 0.0) + s.demand

    caps = {}
    for (u, v) in sorted(loads):
        try:
            cap = link_capacity(cfg.uavs[u], cfg.uavs[v], p)
        except CoincidentPositions:
            cap = 0.0
        caps[(u, v)] = cap
        if cap < p.conn_threshold:
            violations.append(Violation("Disconnected", f"link {u}-{v} carries {cap:.1f} Mbps", (u, v)))

    per_radio: dict[tuple[str, int], float] = {}
    for (u, v), share in sorted(cfg.shares.items()):
        if u not in cfg.uavs or v not in cfg.uavs or u == v:
            continue
        if planar_distance(cfg.uavs[u].pos, cfg.uavs[v].pos) == 0.0:
            continue
        key = (u, _radio_of(cfg, u, v))
        per_radio[key] = per_radio.get(key, 0.0) + share
    for (u, m), total in sorted(per_radio.items()):
        if total > 1.0 + SHARE_TOL:
            violations.append(Violation("ShareOverflow", f"radio {m} of {u} is booked {total:.3f}", (u, m)))

    for (u, v), load in sorted(loads.items()):
        cap = caps[(u, v)]
        for a, b in ((u, v), (v, u)):
            share = cfg.shares.get((a, b), 0.0)
            if share * cap < lam * load * (1.0 - 1e-9) - 1e-9:
                violations.append(Violation(
                    "InsufficientShare",
                    f"{a}->{b}: share {share:.3f} x {cap:.1f} Mbps < {lam:g} x {load:.1f} Mbps",
                    (a, b)))
    return violations


def max_satisfaction(cfg: NetworkConfig, sessions: Iterable[Session], p: LinkModelParams,
                     strict: bool = True, check: bool = True) -> SatisfactionReport:
    """Largest per-session satisfaction for the fixed routes, with matching shares.

    Every radio splits its airtime so all flows through it get a common
    ``λ = 1 / Σ T_k / C_edge``; a session takes the minimum over the radios its
    route touches. The returned shares carry each session's demand scaled by
    ``min(λ, 1)``: airtime beyond what the demand needs is left free. With ``strict=False`` a session crossing a disconnected link
    is scored 0 and its traffic is dropped instead of raising. ``check=False``
    skips the violation scan for callers that only need the λ values.
    """
    sessions = list(sessions)
    demands = {s.id: s.demand for s in sessions}
    caps: dict[tuple[str, str], float] = {}
    radio_of: dict[tuple[str, str], int] = {}
    dead: set[str] = set()
    structural_bad: set[str] = set()

    for s in sessions:
        if _route_problems(cfg, s):
            structural_bad.add(s.id)
            continue
        path = cfg.routes[s.id]
        for u, v in zip(path, path[1:]):
            key = edge_key(u, v)
            if key not in caps:
                try:
                    caps[key] = link_capacity(cfg.uavs[key[0]], cfg.uavs[key[1]], p)
                except CoincidentPositions:
                    caps[key] = 0.0
            if caps[key] < p.conn_threshold:
                if strict:
                    raise DisconnectedRoute(f"session {s.id}: link {u}-{v} at {caps[key]:.1f} Mbps")
                dead.add(s.id)

    load: dict[tuple[str, int], float] = {}
    touched: dict[str, set[tuple[str, int]]] = {}
    for s in sessions:
        if s.id in dead or s.id in structural_bad:
            continue
        path = cfg.routes[s.id]
        radios = touched.setdefault(s.id, set())
        for u, v in zip(path, path[1:]):
            cap = caps[edge_key(u, v)]
            for a, b in ((u, v), (v, u)):
                if (a, b) not in radio_of:
                    radio_of[(a, b)] = _radio_of(cfg, a, b)
                key = (a, radio_of[(a, b)])
                load[key] = load.get(key, 0.0) + s.demand / cap
                radios.add(key)

    lam_radio = {k: (1.0 / v if v > 0 else math.inf) for k, v in load.items()}
    per_session = {}
    for s in sessions:
        if s.id in dead or s.id in structural_bad:
            per_session[s.id] = 0.0
        else:
            per_session[s.id] = min((lam_radio[k] for k in touched[s.id]), default=math.inf)

    shares: dict[tuple[str, str], float] = {}
    util: dict[tuple[str, int], float] = {}
    for s in sessions:
        lam_s = per_session[s.id]
        if lam_s == 0.0 or math.isinf(lam_s):
            continue
        path = cfg.routes[s.id]
        for u, v in zip(path, path[1:]):
            gamma = min(lam_s, 1.0) * s.demand / caps[edge_key(u, v)]
            for a, b in ((u, v), (v, u)):
                shares[(a, b)] = shares.get((a, b), 0.0) + gamma
                key = (a, radio_of[(a, b)])
                util[key] = util.get(key, 0.0) + gamma

    min_lam = min(per_session.values(), default=math.inf)
    declared = min(min_lam, 1.0)
    shared_cfg = NetworkConfig(cfg.uavs, cfg.routes, shares, declared)
    violations = validate(shared_cfg, sessions, p, lam=declared) if check else []
    return SatisfactionReport(per_session, min_lam, util, violations, demands, shares)


def evaluate(cfg: NetworkConfig, sessions: Iterable[Session], p: LinkModelParams,
             check: bool = True) -> SatisfactionReport:
    """Lenient :func:`max_satisfaction`: disconnected sessions score 0."""
    return max_satisfaction(cfg, sessions, p, strict=False, check=check)


def with_shares(cfg: NetworkConfig, report: SatisfactionReport, lam: float | None = None) -> NetworkConfig:
    """Copy of ``cfg`` carrying the report's shares and a declared satisfaction level."""
    if lam is None:
        lam = min(report.min_lambda, 1.0) if math.isfinite(report.min_lambda) else 1.0
    return NetworkConfig(dict(cfg.uavs), dict(cfg.routes), dict(report.shares), lam)


def session_throughput(report: SatisfactionReport, session_id: str) -> float:
    """Delivered goodput: satisfaction capped at 1, times demand."""
    if session_id not in report.per_session_lambda:
        raise UnknownSession(session_id)
    return min(report.per_session_lambda[session_id], 1.0) * report.demands[session_id]


def gs_ids(cfg: NetworkConfig) -> list[str]:
    return [u.id for u in cfg.by_role(Role.GROUND_STATION)]
