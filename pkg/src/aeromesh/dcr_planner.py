"""Joint deployment, connectivity and routing planner.

Two stages. The radial stage gives every session its own relay chain along the
ray from the ground station to the application UAV, sizing hop lengths so the
shared ground-station radios are not over-booked, and sweeps the ground
station yaw for the fewest relays. The angular stage then merges relays of
different sessions whenever one relay can carry both without pushing any
session below the target satisfaction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core_types import (
    TWO_PI,
    NetworkConfig,
    PolarPos,
    Role,
    Session,
    UavState,
    bearing,
    from_cartesian,
    normalize_angle,
    planar_distance,
)
from .errors import CoincidentPositions, DemandUnsatisfiableAtAnyRange, Infeasible, NoOrientation
from .link_model import (
    LinkModelParams,
    capacity_array,
    combine_misalignment,
    max_range,
    misalignment,
    serving_radio,
)
from .routing_eval import evaluate, max_satisfaction, with_shares

LAMBDA_SLACK = 1e-9
# candidates closer than this to an existing UAV are dropped
MIN_SEPARATION = 1.0


@dataclass(frozen=True)
class PlannerOptions:
    phi_grid_step: float = math.radians(1.0)
    orient_grid_step: float = math.radians(1.0)
    lambda_target: float = 1.0
    max_contraction_passes: int = 20
    tolerance: float = 1e-9
    relay_radios: int = 3
    refine_orient: bool = True
    contract: bool = True

    def __post_init__(self):
        if not (self.phi_grid_step > 0 and self.orient_grid_step > 0):
            raise ValueError("grid steps must be > 0")
        if not self.lambda_target > 0:
            raise ValueError("lambda_target must be > 0")
        if self.relay_radios < 2:
            raise ValueError("relays need at least 2 radios to forward traffic")


@dataclass(frozen=True)
class OrientNeighbor:
    pos: PolarPos
    yaw: float
    demand: float
    num_radios: int = 3


@dataclass(frozen=True)
class OrientResult:
    phi: float
    sector_lambda: dict[int, float]
    shares: tuple[float, ...]
    min_lambda: float


@dataclass(frozen=True)
class ContractionCandidate:
    pair: tuple[str, str]
    points: tuple[PolarPos, ...]
    chosen: PolarPos | None = None


@dataclass
class RadialSweep:
    phis: np.ndarray
    counts: np.ndarray
    best_phi: float
    hops: dict[str, int]
    shares: dict[str, float] = field(default_factory=dict)
    tilts: dict[str, float] = field(default_factory=dict)


@dataclass
class MultiGsPlan:
    gs_ids: list[str]
    config: NetworkConfig
    sessions: list[Session]


# ---------------------------------------------------------------- orientation

@dataclass(frozen=True)
class _OrientGeometry:
    dist: np.ndarray
    beta: np.ndarray
    alpha_far: np.ndarray
    demand: np.ndarray


def _orient_geometry(pos: PolarPos, nbrs: Sequence[OrientNeighbor]) -> _OrientGeometry:
    count = len(nbrs)
    dist = np.empty(count)
    beta = np.empty(count)
    alpha_far = np.empty(count)
    demand = np.empty(count)
    for k, nb in enumerate(nbrs):
        dist[k] = planar_distance(pos, nb.pos)
        if dist[k] == 0.0:
            raise CoincidentPositions("neighbor shares the UAV's planar position")
        beta[k] = bearing(pos, nb.pos)
        far = UavState("_", Role.RELAY, nb.pos, nb.yaw, nb.num_radios)
        alpha_far[k] = misalignment(far, normalize_angle(beta[k] + math.pi))
        demand[k] = nb.demand
    return _OrientGeometry(dist, beta, alpha_far, demand)


def _orient_table(phis: np.ndarray, geo: _OrientGeometry, p: LinkModelParams, num_radios: int):
    """Per candidate yaw: min sector λ, serving radio and capacity of every neighbor."""
    width = TWO_PI / num_radios
    rel = np.mod(geo.beta[None, :] - phis[:, None] + width / 2.0, TWO_PI)
    radios = np.minimum((rel // width).astype(int), num_radios - 1)
    alpha = np.abs(np.mod(rel, width) - width / 2.0)
    caps = capacity_array(geo.dist[None, :], combine_misalignment(alpha, geo.alpha_far[None, :], p), p)
    ok = caps >= p.conn_threshold
    t = np.where(ok, geo.demand[None, :] / np.where(ok, caps, 1.0), np.inf)
    load = np.zeros((len(phis), num_radios))
    for m in range(num_radios):
        load[:, m] = np.where(radios == m, t, 0.0).sum(axis=1)
    worst = load.max(axis=1)
    with np.errstate(divide="ignore"):
        lam = np.where(worst > 0.0, 1.0 / worst, np.inf)
    lam[~ok.all(axis=1)] = 0.0
    return lam, radios, caps


def _link_edges(geo: _OrientGeometry, p: LinkModelParams, width: float) -> np.ndarray:
    """Yaws just inside the edges of each neighbor's connectivity window.

    A neighbor stays connected while the near-end misalignment is below some
    limit; bisection finds it. Any non-empty intersection of these windows
    starts at one of their edges, so a feasible yaw window narrower than the
    grid step is still sampled.
    """
    lo = np.zeros_like(geo.dist)
    hi = np.full_like(geo.dist, math.pi)

    def connected(a):
        return capacity_array(geo.dist, combine_misalignment(a, geo.alpha_far, p), p) >= p.conn_threshold

    usable = connected(lo) & ~connected(hi)
    for _ in range(50):
        mid = (lo + hi) / 2.0
        ok = connected(mid)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    limit = lo[usable]
    beta = geo.beta[usable]
    # nudge inward so the edge itself counts as connected
    inner = np.maximum(limit - 1e-9, 0.0)
    return np.mod(np.concatenate([beta - inner, beta + inner]), width)


def _first_best(phis: np.ndarray, lam: np.ndarray) -> tuple[float, float]:
    best = float(lam.max())
    return float(phis[int(np.flatnonzero(lam >= best - 1e-12)[0])]), best


def solve_orient(pos: PolarPos, neighbors: Sequence[OrientNeighbor], p: LinkModelParams,
                 opt: PlannerOptions | None = None, num_radios: int = 3) -> OrientResult:
    """Yaw in [0, 2π/M) maximising the worst per-sector satisfaction at ``pos``.

    For a fixed yaw each sector is a single-constraint LP (Σ γ_b ≤ 1,
    γ_b·Cap_b ≥ λ·T_b) whose optimum is λ = 1 / Σ_b T_b/Cap_b. The yaw is swept on
    a grid plus the exact-alignment yaw of every neighbor, then polished by two
    rounds of finer grids around the best point.
    """
    opt = opt or PlannerOptions()
    if not neighbors:
        raise NoOrientation("no neighbors to orient toward")
    geo = _orient_geometry(pos, neighbors)
    width = TWO_PI / num_radios
    steps = max(1, math.ceil(width / opt.orient_grid_step - 1e-9))
    grid = np.arange(steps) * opt.orient_grid_step
    phis = np.unique(np.concatenate([grid[grid < width], np.mod(geo.beta, width), _link_edges(geo, p, width)]))
    lam = _orient_table(phis, geo, p, num_radios)[0]
    phi, best = _first_best(phis, lam)
    if best <= 0.0:
        raise NoOrientation("some neighbor is disconnected at every yaw")

    if opt.refine_orient and math.isfinite(best):
        span = opt.orient_grid_step
        for _ in range(2):
            local = np.mod(phi + np.linspace(-span, span, 41), width)
            cand_phi, cand = _first_best(local, _orient_table(local, geo, p, num_radios)[0])
            if cand > best + 1e-12:
                phi, best = cand_phi, cand
            span /= 20.0

    lam, radios, caps = _orient_table(np.array([phi]), geo, p, num_radios)
    t = geo.demand / caps[0]
    sector_lambda = {}
    for m in sorted(set(int(r) for r in radios[0])):
        sector_lambda[m] = 1.0 / float(t[radios[0] == m].sum())
    shares = tuple(float(sector_lambda[int(radios[0][k])] * t[k]) for k in range(len(neighbors)))
    return OrientResult(phi, sector_lambda, shares, float(lam[0]))


# ---------------------------------------------------------------- radial stage

def chain_offsets(relay_radios: int, p: LinkModelParams) -> tuple[float, float]:
    """(yaw offset x, inherent gap δ) for a relay sitting on a straight chain.

    With the inward radio pointed ``x`` off the inward bearing, the outward
    bearing sits ``δ - x`` off the nearest boresight; δ is 0 for an even radio
    count and π/M for an odd one.
    """
    width = TWO_PI / relay_radios
    delta = abs(math.remainder(math.pi, width))
    offset = 0.0 if p.combine == "sum" else delta / 2.0
    return offset, delta


def _session_geometry(sessions: Sequence[Session], apps: dict[str, UavState], gs: UavState):
    r = np.empty(len(sessions))
    beta = np.empty(len(sessions))
    for k, s in enumerate(sessions):
        app = apps[s.app_uav]
        r[k] = planar_distance(gs.pos, app.pos)
        if r[k] == 0.0:
            raise Infeasible(f"session {s.id}: application UAV sits on the ground station")
        beta[k] = bearing(gs.pos, app.pos)
    return r, beta


@dataclass
class ChainTable:
    """Per session k and hop count n: hop length, usability and GS-side tilt.

    ``tilt[k, n-1]`` is extra misalignment the first relay accepts toward the
    GS so the remaining hops can share the chain's built-in misalignment more
    evenly (only used when per-end misalignments add up). ``app_alpha[k]`` is
    the misalignment the application UAV itself has toward the chain.
    """

    hop: np.ndarray
    usable: np.ndarray
    tilt: np.ndarray
    demand: np.ndarray
    need: np.ndarray
    app_alpha: np.ndarray


def chain_table(r: np.ndarray, demand: np.ndarray, p: LinkModelParams, opt: PlannerOptions,
                app_alpha: np.ndarray | None = None) -> ChainTable:
    x, delta = chain_offsets(opt.relay_radios, p)
    app_alpha = np.zeros_like(r) if app_alpha is None else np.asarray(app_alpha, dtype=float)
    nmax = max(2, int(math.ceil(float(r.max()) / 20.0)) + 1)
    n = np.arange(1, nmax + 1)
    h = r[:, None] / n[None, :]
    # a hair above the demand so rebuilding the geometry cannot round below it
    need = np.maximum(demand * opt.lambda_target, p.conn_threshold)[:, None] * (1.0 + 1e-7)
    tilt = np.zeros_like(h)
    if p.combine == "sum" and delta > 0.0:
        # with tilt t the relay-to-relay and last hops all sit at δ - t/(n-1)
        psi = np.linspace(0.0, delta, 721)
        ok = capacity_array(h[..., None], psi, p) >= need[..., None]
        ok = np.logical_and.accumulate(ok, axis=2)
        best = np.where(ok.any(axis=2), psi[ok.sum(axis=2).clip(1) - 1], -np.inf)
        spread = np.maximum(n[None, :] - 1, 1)
        # the last hop also carries the application UAV's own misalignment
        tilt = np.clip((delta - best + app_alpha[:, None]) * spread, 0.0, None)
        local = (n[None, :] == 1) | (np.isfinite(best) & (tilt <= delta + 1e-12))
        tilt = np.where(local & (n[None, :] > 1), np.minimum(tilt, delta), 0.0)
    else:
        last_ok = capacity_array(h, combine_misalignment(delta - x, app_alpha[:, None], p), p) >= need
        inner_ok = capacity_array(h, combine_misalignment(delta - x, x, p), p) >= need
        local = (n[None, :] == 1) | (last_ok & ((n[None, :] < 3) | inner_ok))
    return ChainTable(h, local, tilt, demand * opt.lambda_target, need, app_alpha)


def gs_weights(table: ChainTable, alpha: np.ndarray, p: LinkModelParams, opt: PlannerOptions) -> np.ndarray:
    """GS-radio share ``w[..., k, n-1]`` of session k split into n hops (inf if unusable).

    ``alpha`` holds the GS-side misalignment per session with any leading
    batch shape.
    """
    x, _ = chain_offsets(opt.relay_radios, p)
    n = np.arange(1, table.hop.shape[1] + 1)
    a = alpha[..., None]
    direct = combine_misalignment(a, np.broadcast_to(table.app_alpha[:, None], a.shape), p)
    relayed = combine_misalignment(a, x + table.tilt, p)
    dphi = np.where(n == 1, direct, relayed)
    cap = capacity_array(table.hop, dphi, p)
    valid = table.usable & (cap >= table.need)
    return np.where(valid, table.demand[:, None] / np.where(valid, cap, 1.0), np.inf)


def _allocate(w: np.ndarray, tol: float = 1e-9) -> np.ndarray | None:
    """Hop counts (1-based) minimising Σ n_k subject to Σ_k w[k, n_k] ≤ 1.

    Lagrangian relaxation with bisection on the multiplier of the shared
    radio constraint, followed by a greedy pass that drops hops wherever the
    remaining slack allows.
    """
    finite = np.isfinite(w)
    if not finite.any(axis=1).all():
        return None
    if w.min(axis=1).sum() > 1.0 + tol:
        return None
    n = np.arange(1, w.shape[1] + 1, dtype=float)
    rows = np.arange(w.shape[0])

    def pick(mu: float) -> np.ndarray:
        cost = np.where(finite, n[None, :] + mu * np.where(finite, w, 0.0), np.inf)
        return cost.argmin(axis=1)

    def load(sel):
        return float(w[rows, sel].sum())

    sel = pick(0.0)
    if load(sel) > 1.0 + tol:
        lo, hi = 0.0, 1.0
        while load(pick(hi)) > 1.0 + tol:
            hi *= 2.0
            if hi > 1e15:
                sel = w.argmin(axis=1)
                break
        else:
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if load(pick(mid)) > 1.0 + tol:
                    lo = mid
                else:
                    hi = mid
            sel = pick(hi)

    while True:
        total = load(sel)
        slack = 1.0 + tol - total + w[rows, sel]
        ok = finite & (w <= slack[:, None]) & (np.arange(w.shape[1])[None, :] < sel[:, None])
        if not ok.any():
            break
        first = np.where(ok.any(axis=1), ok.argmax(axis=1), sel)
        saving = sel - first
        k = int(saving.argmax())
        if saving[k] <= 0:
            break
        sel = sel.copy()
        sel[k] = first[k]
    return sel + 1


def init_deploy(sector_sessions: Sequence[Session], phi: float, gs: UavState,
                apps: dict[str, UavState], p: LinkModelParams,
                opt: PlannerOptions | None = None) -> dict[str, tuple[int, float, float]]:
    """Hop count, hop length and GS-radio share for every session of one GS sector."""
    opt = opt or PlannerOptions()
    sessions = list(sector_sessions)
    if not sessions:
        raise ValueError("init_deploy needs at least one session")
    r, beta = _session_geometry(sessions, apps, gs)
    oriented = gs.moved(yaw=phi)
    alpha = np.array([misalignment(oriented, b) for b in beta])
    demand = np.array([s.demand for s in sessions])
    w = gs_weights(chain_table(r, demand, p, opt), alpha, p, opt)
    hops = _allocate(w, opt.tolerance)
    if hops is None:
        raise Infeasible("ground-station radio over-subscribed even at the shortest hops")
    return {s.id: (int(hops[k]), float(r[k] / hops[k]), float(w[k, hops[k] - 1]))
            for k, s in enumerate(sessions)}


def radial_sweep(sessions: Sequence[Session], apps: dict[str, UavState], gs: UavState,
                 p: LinkModelParams, opt: PlannerOptions | None = None,
                 fixed_app_yaw: bool = False) -> RadialSweep:
    """Relay count for every GS yaw on the grid, and the hop plan of the best one.

    Application UAVs are assumed to turn toward their chain unless
    ``fixed_app_yaw`` is set, in which case their current yaws are kept and
    the last hop pays for the resulting misalignment.
    """
    opt = opt or PlannerOptions()
    sessions = sorted(sessions, key=lambda s: s.id)
    width = gs.sector_width
    steps = max(1, math.ceil(width / opt.phi_grid_step - 1e-9))
    phis = np.arange(steps) * opt.phi_grid_step
    phis = phis[phis < width]
    r, beta = _session_geometry(sessions, apps, gs)
    demand = np.array([s.demand for s in sessions])
    rel = np.mod(beta[None, :] - phis[:, None] + width / 2.0, TWO_PI)
    sectors = np.minimum((rel // width).astype(int), gs.num_radios - 1)
    alpha = np.abs(np.mod(rel, width) - width / 2.0)
    app_alpha = None
    if fixed_app_yaw:
        app_alpha = np.array([misalignment(apps[s.app_uav], bearing(apps[s.app_uav].pos, gs.pos))
                              for s in sessions])
    table = chain_table(r, demand, p, opt, app_alpha)
    w = gs_weights(table, alpha, p, opt)

    counts = np.full(len(phis), np.inf)
    plans = {}
    for i in range(len(phis)):
        total = 0
        chosen = np.zeros(len(sessions), dtype=int)
        for m in np.unique(sectors[i]):
            idx = np.flatnonzero(sectors[i] == m)
            hops = _allocate(w[i, idx], opt.tolerance)
            if hops is None:
                total = None
                break
            chosen[idx] = hops
            total += int((hops - 1).sum())
        if total is not None:
            counts[i] = total
            plans[i] = chosen
    if not np.isfinite(counts).any():
        raise Infeasible("no ground-station yaw lets every sector meet its demands")
    best = int(np.flatnonzero(counts == counts.min())[0])
    chosen = plans[best]
    rows = np.arange(len(sessions))
    gamma = w[best, rows, chosen - 1]
    return RadialSweep(phis, counts, float(phis[best]),
                       {s.id: int(chosen[k]) for k, s in enumerate(sessions)},
                       {s.id: float(gamma[k]) for k, s in enumerate(sessions)},
                       {s.id: float(table.tilt[k, chosen[k] - 1]) for k, s in enumerate(sessions)})


def _relay_yaw(relay_pos: PolarPos, inward: PolarPos, offset: float) -> float:
    return normalize_angle(bearing(relay_pos, inward) + offset)


def chain_config(sessions: Sequence[Session], apps: dict[str, UavState], gs: UavState, phi: float,
                 hops: dict[str, int], p: LinkModelParams, opt: PlannerOptions,
                 first_index: int = 0, tilts: dict[str, float] | None = None) -> NetworkConfig:
    """Materialise one straight relay chain per session.

    Relay j of an n-hop chain (counting from the GS) turns ``x + t·(n-j)/(n-1)``
    away from its inward neighbor, t being the session's tilt.
    """
    tilts = tilts or {}
    x, _ = chain_offsets(opt.relay_radios, p)
    uavs = {gs.id: gs.moved(yaw=phi)}
    routes = {}
    gx, gy = gs.pos.xy
    counter = first_index
    for s in sorted(sessions, key=lambda s: s.id):
        app = apps[s.app_uav]
        ax, ay = app.pos.xy
        n = hops[s.id]
        tilt = tilts.get(s.id, 0.0)
        chain = [gs.id]
        inward = gs.pos
        for i in range(1, n):
            f = i / n
            pos = from_cartesian(gx + f * (ax - gx), gy + f * (ay - gy), app.pos.altitude)
            rid = f"R{counter}"
            counter += 1
            offset = x + tilt * (n - i) / (n - 1)
            uavs[rid] = UavState(rid, Role.RELAY, pos, _relay_yaw(pos, inward, offset), opt.relay_radios)
            chain.append(rid)
            inward = pos
        uavs.setdefault(app.id, app)
        uavs[app.id] = uavs[app.id].moved(yaw=bearing(app.pos, inward))
        chain.append(app.id)
        routes[s.id] = tuple(reversed(chain))
    cfg = NetworkConfig(uavs, routes, {}, opt.lambda_target)
    _face_apps(cfg, sessions, p, opt)
    return cfg


def _face_apps(cfg: NetworkConfig, sessions: Sequence[Session], p: LinkModelParams,
               opt: PlannerOptions) -> None:
    """Orient application UAVs that talk to more than one neighbor."""
    demands = {s.id: s.demand for s in sessions}
    for app_id in sorted({s.app_uav for s in sessions}):
        if len(cfg.neighbors(app_id)) > 1:
            _reorient_in_place(cfg, app_id, demands, p, opt)


def radial_optimize(sessions: Sequence[Session], apps: dict[str, UavState], gs: UavState,
                    p: LinkModelParams, opt: PlannerOptions | None = None) -> NetworkConfig:
    """Per-session relay chains on the GS-to-application rays, GS yaw swept for fewest relays."""
    opt = opt or PlannerOptions()
    sweep = radial_sweep(sessions, apps, gs, p, opt)
    cfg = chain_config(sessions, apps, gs, sweep.best_phi, sweep.hops, p, opt, tilts=sweep.tilts)
    return _finish(cfg, sessions, p, opt)


def _finish(cfg: NetworkConfig, sessions: Sequence[Session], p: LinkModelParams,
            opt: PlannerOptions) -> NetworkConfig:
    report = max_satisfaction(cfg, sessions, p, strict=True)
    if report.min_lambda < opt.lambda_target - 1e-6:
        raise Infeasible(f"planned configuration reaches only λ = {report.min_lambda:.4f}")
    return with_shares(cfg, report, opt.lambda_target)


# ---------------------------------------------------------------- angular stage

def _link_traffic(cfg: NetworkConfig, uav_id: str, demands: dict[str, float]) -> dict[str, float]:
    out: dict[str, float] = {}
    for sid, path in cfg.routes.items():
        for u, v in zip(path, path[1:]):
            if u == uav_id:
                out[v] = out.get(v, 0.0) + demands[sid]
            elif v == uav_id:
                out[u] = out.get(u, 0.0) + demands[sid]
    return out


def _orient_neighbors(cfg: NetworkConfig, uav_id: str, demands: dict[str, float],
                      ideal: bool = False) -> list[OrientNeighbor]:
    me = cfg.uavs[uav_id]
    out = []
    for b, traffic in sorted(_link_traffic(cfg, uav_id, demands).items()):
        nb = cfg.uavs[b]
        yaw = bearing(nb.pos, me.pos) if ideal else nb.yaw
        out.append(OrientNeighbor(nb.pos, yaw, traffic, nb.num_radios))
    return out


def _reorient_in_place(cfg: NetworkConfig, uav_id: str, demands: dict[str, float],
                       p: LinkModelParams, opt: PlannerOptions) -> OrientResult | None:
    nbrs = _orient_neighbors(cfg, uav_id, demands)
    if not nbrs:
        return None
    me = cfg.uavs[uav_id]
    try:
        res = solve_orient(me.pos, nbrs, p, opt, me.num_radios)
    except (NoOrientation, CoincidentPositions):
        return None
    cfg.uavs[uav_id] = me.moved(yaw=res.phi)
    return res


def _circle_intersections(c1, r1, c2, r2):
    (x1, y1), (x2, y2) = c1, c2
    dx, dy = x2 - x1, y2 - y1
    d = math.hypot(dx, dy)
    if d == 0.0 or d > r1 + r2 or d < abs(r1 - r2):
        return []
    a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d)
    h = math.sqrt(max(r1 * r1 - a * a, 0.0))
    mx, my = x1 + a * dx / d, y1 + a * dy / d
    if h == 0.0:
        return [(mx, my)]
    return [(mx - h * dy / d, my + h * dx / d), (mx + h * dy / d, my - h * dx / d)]


def contract_points(i: str, j: str, cfg: NetworkConfig, sessions: Iterable[Session],
                    p: LinkModelParams) -> list[PolarPos]:
    """Corners of the region every neighbor of ``i`` or ``j`` can reach, plus its centroid.

    Each neighbor b contributes a disk of radius ``max_range(T_b, 0)`` where
    T_b is the traffic the merged relay would exchange with b.
    """
    demands = {s.id: s.demand for s in sessions}
    traffic: dict[str, float] = {}
    for x in (i, j):
        for b, t in _link_traffic(cfg, x, demands).items():
            if b not in (i, j):
                traffic[b] = traffic.get(b, 0.0) + t
    if not traffic:
        return []
    disks = []
    for b in sorted(traffic):
        try:
            radius = max_range(traffic[b], 0.0, p)
        except DemandUnsatisfiableAtAnyRange:
            return []
        disks.append((cfg.uavs[b].pos.xy, radius))

    def inside(pt):
        return all(math.hypot(pt[0] - c[0], pt[1] - c[1]) <= rad * (1 + 1e-9) + 1e-9 for c, rad in disks)

    corners = []
    for a in range(len(disks)):
        for b in range(a + 1, len(disks)):
            for pt in _circle_intersections(*disks[a], *disks[b]):
                if inside(pt) and all(math.hypot(pt[0] - q[0], pt[1] - q[1]) > 1e-6 for q in corners):
                    corners.append(pt)
    if corners:
        cx = sum(pt[0] for pt in corners) / len(corners)
        cy = sum(pt[1] for pt in corners) / len(corners)
        points = corners + [(cx, cy)]
    else:
        # no boundary crossings: the region is either empty or the smallest disk
        smallest = min(disks, key=lambda d: d[1])
        if not inside(smallest[0]) or not all(
                math.hypot(smallest[0][0] - c[0], smallest[0][1] - c[1]) + smallest[1] <= rad + 1e-9
                for c, rad in disks):
            return []
        points = [smallest[0]]
    return [from_cartesian(x, y) for x, y in points]


def _sector_keys(cfg: NetworkConfig, sessions: Sequence[Session]) -> dict[str, tuple[str, int]]:
    out = {}
    for s in sessions:
        path = cfg.routes[s.id]
        gs = cfg.uavs[s.gs]
        out[s.id] = (s.gs, serving_radio(gs, bearing(gs.pos, cfg.uavs[path[-2]].pos)))
    return out


def _merge(cfg: NetworkConfig, i: str, j: str, pos: PolarPos, new_id: str,
           relay_radios: int) -> NetworkConfig:
    uavs = {k: v for k, v in cfg.uavs.items() if k not in (i, j)}
    uavs[new_id] = UavState(new_id, Role.RELAY, pos, 0.0, relay_radios)
    routes = {sid: tuple(new_id if u in (i, j) else u for u in path) for sid, path in cfg.routes.items()}
    return NetworkConfig(uavs, routes, {}, cfg.lam)


def _meets(report, target: float) -> bool:
    return report.min_lambda >= target - LAMBDA_SLACK


def _settle(cfg: NetworkConfig, new_id: str, sessions: Sequence[Session], demands: dict[str, float],
            p: LinkModelParams, opt: PlannerOptions) -> NetworkConfig | None:
    """Orient a freshly merged relay (and, failing that, its neighbors too)."""
    me = cfg.uavs[new_id]
    try:
        upper = solve_orient(me.pos, _orient_neighbors(cfg, new_id, demands, ideal=True), p, opt, me.num_radios)
    except (NoOrientation, CoincidentPositions):
        return None
    if upper.min_lambda < opt.lambda_target - LAMBDA_SLACK:
        return None
    res = _reorient_in_place(cfg, new_id, demands, p, opt)
    if res is not None and res.min_lambda >= opt.lambda_target - LAMBDA_SLACK:
        if _meets(evaluate(cfg, sessions, p, check=False), opt.lambda_target):
            return cfg
    if res is None:
        cfg.uavs[new_id] = cfg.uavs[new_id].moved(yaw=upper.phi)
    trial = cfg.copy()
    for b in cfg.neighbors(new_id):
        _reorient_in_place(trial, b, demands, p, opt)
    _reorient_in_place(trial, new_id, demands, p, opt)
    if _meets(evaluate(trial, sessions, p, check=False), opt.lambda_target):
        return trial
    return None


def _app_positions(cfg: NetworkConfig, sessions: Sequence[Session], uav_id: str) -> list[tuple[float, float]]:
    return [cfg.uavs[s.app_uav].pos.xy for s in sessions if uav_id in cfg.routes[s.id]]


def _try_pair(cfg: NetworkConfig, i: str, j: str, sessions: Sequence[Session], demands: dict[str, float],
              p: LinkModelParams, opt: PlannerOptions, new_id: str) -> NetworkConfig | None:
    points = contract_points(i, j, cfg, sessions, p)
    if not points:
        return None
    targets = _app_positions(cfg, sessions, i) + _app_positions(cfg, sessions, j)
    others = [u.pos for k, u in cfg.uavs.items() if k not in (i, j)]

    def score(pos):
        x, y = pos.xy
        return (math.sqrt(sum((x - ax) ** 2 + (y - ay) ** 2 for ax, ay in targets)), pos.xy)

    for pos in sorted(points, key=score):
        if any(planar_distance(pos, q) < MIN_SEPARATION for q in others):
            continue
        merged = _merge(cfg, i, j, pos, new_id, opt.relay_radios)
        settled = _settle(merged, new_id, sessions, demands, p, opt)
        if settled is not None:
            return settled
    return None


def _next_relay_id(cfg: NetworkConfig) -> str:
    used = {k for k in cfg.uavs}
    n = 0
    while f"M{n}" in used:
        n += 1
    return f"M{n}"


def _groups(cfg: NetworkConfig, sessions: Sequence[Session], adjacent: bool) -> list[frozenset]:
    keys = sorted(set(_sector_keys(cfg, sessions).values()))
    if not adjacent:
        return [frozenset([k]) for k in keys]
    out = []
    for gs_id in sorted({k[0] for k in keys}):
        count = cfg.uavs[gs_id].num_radios
        if count < 2:
            continue
        for m in range(count if count > 2 else 1):
            out.append(frozenset([(gs_id, m), (gs_id, (m + 1) % count)]))
    return out


def _contract_once(cfg: NetworkConfig, group: frozenset, sessions: Sequence[Session],
                   demands: dict[str, float], p: LinkModelParams, opt: PlannerOptions,
                   failed: set) -> NetworkConfig | None:
    sector_of = _sector_keys(cfg, sessions)
    members = {}
    for relay in cfg.relays:
        carried = cfg.sessions_through(relay.id)
        if carried and {sector_of[s] for s in carried} <= group:
            members[relay.id] = (relay, carried)
    ordered = sorted(members, key=lambda k: (members[k][0].pos.r, k))
    pairs = []
    for a_idx, a in enumerate(ordered):
        for b in ordered[a_idx + 1:]:
            if members[a][1] & members[b][1]:
                continue
            key = frozenset((a, b))
            if key in failed:
                continue
            ra, rb = members[a][0].pos.r, members[b][0].pos.r
            pairs.append((max(ra, rb), min(ra, rb), a, b))
    new_id = _next_relay_id(cfg)
    for _, _, a, b in sorted(pairs):
        merged = _try_pair(cfg, a, b, sessions, demands, p, opt, new_id)
        if merged is not None:
            return merged
        failed.add(frozenset((a, b)))
    return None


def angular_contract(cfg: NetworkConfig, sessions: Sequence[Session], p: LinkModelParams,
                     opt: PlannerOptions | None = None) -> NetworkConfig:
    """Merge relays of different sessions while every session stays at the target."""
    opt = opt or PlannerOptions()
    sessions = sorted(sessions, key=lambda s: s.id)
    demands = {s.id: s.demand for s in sessions}
    current = cfg.copy()
    failed: set = set()
    for adjacent in (False, True):
        for _ in range(opt.max_contraction_passes):
            changed = False
            for group in _groups(current, sessions, adjacent):
                while True:
                    merged = _contract_once(current, group, sessions, demands, p, opt, failed)
                    if merged is None:
                        break
                    current = merged
                    changed = True
            if not changed:
                break
    if current.relay_count == cfg.relay_count:
        return cfg
    return _finish(current, sessions, p, opt)


def plan(sessions: Sequence[Session], apps: dict[str, UavState], gs: UavState,
         p: LinkModelParams, opt: PlannerOptions | None = None) -> NetworkConfig:
    """Radial chains followed by angular contraction."""
    opt = opt or PlannerOptions()
    radial = radial_optimize(sessions, apps, gs, p, opt)
    if not opt.contract or radial.relay_count < 2:
        return radial
    return angular_contract(radial, sessions, p, opt)


# ---------------------------------------------------------------- adaptation

def _hop_depth(cfg: NetworkConfig, uav_id: str) -> int:
    depth = None
    for path in cfg.routes.values():
        if uav_id in path:
            d = len(path) - 1 - path.index(uav_id)
            depth = d if depth is None else min(depth, d)
    return 0 if depth is None else depth


def reorient_only(cfg: NetworkConfig, sessions: Sequence[Session], p: LinkModelParams,
                  opt: PlannerOptions | None = None) -> NetworkConfig | None:
    """Re-solve yaws outward from the ground station; positions stay put.

    Returns the new configuration only if it meets the target.
    """
    opt = opt or PlannerOptions()
    sessions = sorted(sessions, key=lambda s: s.id)
    demands = {s.id: s.demand for s in sessions}
    report = evaluate(cfg, sessions, p)
    affected = [sid for sid, lam in sorted(report.per_session_lambda.items()) if lam < opt.lambda_target]
    if not affected:
        affected = [s.id for s in sessions]
    touched = sorted({u for sid in affected for u in cfg.routes.get(sid, ())},
                     key=lambda u: (_hop_depth(cfg, u), u))
    trial = cfg.copy()
    for _ in range(2):
        for u in touched:
            _reorient_in_place(trial, u, demands, p, opt)
        report = evaluate(trial, sessions, p)
        if _meets(report, opt.lambda_target):
            return with_shares(trial, report, opt.lambda_target)
    return None


# ---------------------------------------------------------------- several ground stations

def split_sessions(sessions: Sequence[Session], gs_ids: Sequence[str]) -> list[Session]:
    """One sub-session per (session, GS) with the demand split equally."""
    if len(gs_ids) == 1:
        return [Session(s.id, s.app_uav, s.demand, gs_ids[0]) for s in sessions]
    return [Session(f"{s.id}@{g}", s.app_uav, s.demand / len(gs_ids), g)
            for s in sessions for g in gs_ids]


def _face_stations(subs: Sequence[Session], apps: dict[str, UavState], stations: Sequence[UavState],
                   p: LinkModelParams, opt: PlannerOptions) -> dict[str, UavState]:
    """Fix every application UAV's yaw so its radios split fairly between its ground stations.

    Chains are straight, so the first hop leaves along the bearing to the
    station; a stand-in neighbor one connectivity-safe hop out stands for it.
    """
    where = {g.id: g.pos for g in stations}
    out = dict(apps)
    for app_id in sorted({s.app_uav for s in subs}):
        app = apps[app_id]
        nbrs = []
        for s in subs:
            if s.app_uav != app_id:
                continue
            b = bearing(app.pos, where[s.gs])
            x, y = app.pos.xy
            step = min(50.0, planar_distance(app.pos, where[s.gs]))
            nbrs.append(OrientNeighbor(from_cartesian(x + step * math.cos(b), y + step * math.sin(b)),
                                       normalize_angle(b + math.pi), s.demand))
        try:
            out[app_id] = app.moved(yaw=solve_orient(app.pos, nbrs, p, opt, app.num_radios).phi)
        except NoOrientation:
            pass
    return out


def _multi_config(sessions, apps, stations, p, opt):
    subs = split_sessions(sessions, [g.id for g in stations])
    several = len(stations) > 1
    if several:
        apps = _face_stations(subs, apps, stations, p, opt)
    uavs: dict[str, UavState] = {}
    routes = {}
    index = 0
    for g in stations:
        mine = [s for s in subs if s.gs == g.id]
        sweep = radial_sweep(mine, apps, g, p, opt, fixed_app_yaw=several)
        part = chain_config(mine, apps, g, sweep.best_phi, sweep.hops, p, opt, first_index=index,
                            tilts=sweep.tilts)
        index += part.relay_count
        uavs.update({k: v for k, v in part.uavs.items() if k not in apps or k not in uavs})
        routes.update(part.routes)
    if several:
        uavs.update({a: apps[a] for a in {s.app_uav for s in subs}})
    cfg = NetworkConfig(uavs, routes, {}, opt.lambda_target)
    report = evaluate(cfg, subs, p)
    if opt.contract and cfg.relay_count >= 2 and _meets(report, opt.lambda_target):
        cfg = angular_contract(with_shares(cfg, report, opt.lambda_target), subs, p, opt)
    return cfg, subs


def plan_multi_gs(sessions: Sequence[Session], apps: dict[str, UavState], gs_candidates: Sequence[UavState],
                  p: LinkModelParams, opt: PlannerOptions | None = None) -> MultiGsPlan:
    """Greedily add ground stations by best (min λ) per deployed UAV until the target is met."""
    opt = opt or PlannerOptions()
    if not gs_candidates:
        raise ValueError("need at least one ground-station candidate")
    sessions = sorted(sessions, key=lambda s: s.id)
    chosen: list[UavState] = []
    remaining = list(gs_candidates)
    while remaining:
        best = None
        for g in remaining:
            try:
                cfg, subs = _multi_config(sessions, apps, chosen + [g], p, opt)
                lam = evaluate(cfg, subs, p).min_lambda
            except Infeasible:
                cfg, subs, lam = None, None, 0.0
            score = min(lam, 1e12) / (len(cfg.uavs) if cfg else 1)
            if best is None or score > best[0] + 1e-12:
                best = (score, g, cfg, subs, lam)
        _, g, cfg, subs, lam = best
        chosen.append(g)
        remaining.remove(g)
        if cfg is not None and lam >= opt.lambda_target - 1e-6:
            report = max_satisfaction(cfg, subs, p, strict=True)
            return MultiGsPlan([s.id for s in chosen], with_shares(cfg, report, opt.lambda_target), subs)
    raise Infeasible("all ground stations in use and the target is still unmet")
