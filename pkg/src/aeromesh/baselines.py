"""Comparison planners sharing the link model and referee with the main planner."""
from __future__ import annotations

import math
from typing import Sequence

import networkx as nx
import numpy as np

from .core_types import NetworkConfig, Role, Session, UavState, bearing, from_cartesian, planar_distance
from .dcr_planner import (
    OrientNeighbor,
    PlannerOptions,
    _finish,
    chain_table,
    gs_weights,
    _reorient_in_place,
    _session_geometry,
    chain_config,
    radial_optimize,
    solve_orient,
)
from .errors import Infeasible, NoOrientation
from .link_model import LinkModelParams, capacity, connectivity_range
from .routing_eval import evaluate, with_shares


def _relay_path_orientation(cfg: NetworkConfig, sessions: Sequence[Session], root: str,
                            p: LinkModelParams, opt: PlannerOptions, sweeps: int = 2) -> None:
    """Point every UAV at its parent, then re-solve yaws breadth-first from ``root``."""
    demands = {s.id: s.demand for s in sessions}
    graph = nx.Graph()
    graph.add_nodes_from(sorted(cfg.uavs))
    graph.add_edges_from(cfg.edges())
    order = [root] + [v for _, v in nx.bfs_edges(graph, root, sort_neighbors=sorted)]
    parent = {v: u for u, v in nx.bfs_edges(graph, root, sort_neighbors=sorted)}
    for v, u in parent.items():
        cfg.uavs[v] = cfg.uavs[v].moved(yaw=bearing(cfg.uavs[v].pos, cfg.uavs[u].pos))
    for _ in range(sweeps):
        for u in order:
            _reorient_in_place(cfg, u, demands, p, opt)


def steiner_mst(sessions: Sequence[Session], apps: dict[str, UavState], gs: UavState,
                p: LinkModelParams, opt: PlannerOptions | None = None) -> NetworkConfig:
    """Euclidean MST over the GS and application UAVs, long edges split by relays.

    Edges longer than the aligned connectivity range get ``ceil(len/R) - 1``
    evenly spaced relays. Traffic is not considered when building the tree, so
    the result can leave sessions far below their demand.
    """
    opt = opt or PlannerOptions()
    reach = connectivity_range(p)
    nodes = [gs.id] + sorted({s.app_uav for s in sessions})
    states = {gs.id: gs, **{a: apps[a] for a in nodes[1:]}}
    full = nx.Graph()
    for a_idx, a in enumerate(nodes):
        for b in nodes[a_idx + 1:]:
            full.add_edge(a, b, weight=planar_distance(states[a].pos, states[b].pos))
    tree = nx.minimum_spanning_tree(full, algorithm="kruskal")

    uavs = dict(states)
    relayed = nx.Graph()
    relayed.add_nodes_from(nodes)
    counter = 0
    for a, b in sorted(tuple(sorted(e)) for e in tree.edges()):
        length = tree[a][b]["weight"]
        splits = max(0, math.ceil(length / reach - 1e-12) - 1)
        (ax, ay), (bx, by) = states[a].pos.xy, states[b].pos.xy
        prev = a
        for i in range(1, splits + 1):
            f = i / (splits + 1)
            rid = f"S{counter}"
            counter += 1
            uavs[rid] = UavState(rid, Role.RELAY, from_cartesian(ax + f * (bx - ax), ay + f * (by - ay)),
                                 0.0, opt.relay_radios)
            relayed.add_edge(prev, rid)
            prev = rid
        relayed.add_edge(prev, b)
    routes = {s.id: tuple(nx.shortest_path(relayed, s.app_uav, gs.id)) for s in sessions}
    cfg = NetworkConfig(uavs, routes, {}, 1.0)
    _relay_path_orientation(cfg, sessions, gs.id, p, opt)
    return with_shares(cfg, evaluate(cfg, sessions, p))


def _proportional_hops(w: np.ndarray, demand: np.ndarray) -> np.ndarray | None:
    """Fewest hops per session once the radio is split in proportion to demand."""
    gamma = demand / demand.sum()
    ok = np.isfinite(w) & (w <= gamma[:, None] * (1.0 + 1e-12))
    if not ok.any(axis=1).all():
        return None
    return ok.argmax(axis=1) + 1


def _gs_sweep(sessions: Sequence[Session], apps: dict[str, UavState], gs: UavState,
              p: LinkModelParams, opt: PlannerOptions):
    """GS yaw grid with, per yaw, each session's sector and the worst ratio of
    a session's peak GS-link capacity to its sector's aggregate demand."""
    width = gs.sector_width
    steps = max(1, math.ceil(width / opt.phi_grid_step - 1e-9))
    phis = np.arange(steps) * opt.phi_grid_step
    phis = phis[phis < width]
    r, beta = _session_geometry(sessions, apps, gs)
    demand = np.array([s.demand for s in sessions])
    rel = np.mod(beta[None, :] - phis[:, None] + width / 2.0, 2.0 * math.pi)
    sectors = np.minimum((rel // width).astype(int), gs.num_radios - 1)
    alpha = np.abs(np.mod(rel, width) - width / 2.0)
    table = chain_table(r, demand, p, opt)
    w = gs_weights(table, alpha, p, opt)
    peak = np.where(np.isfinite(w), demand[:, None] / np.where(np.isfinite(w), w, 1.0), 0.0).max(axis=2)
    headroom = np.full(len(phis), -np.inf)
    for i in range(len(phis)):
        load = np.zeros(len(sessions))
        for m in np.unique(sectors[i]):
            idx = sectors[i] == m
            load[idx] = demand[idx].sum()
        headroom[i] = float((peak[i] / load).min())
    return phis, sectors, headroom, w, table, demand


def gs_headroom(sessions: Sequence[Session], apps: dict[str, UavState], gs: UavState,
                p: LinkModelParams, opt: PlannerOptions | None = None) -> float:
    """Best GS yaw's worst ratio of peak GS-link capacity to sector demand.

    At 1 or more every GS radio can carry its whole sector even when split in
    proportion to demand, so all chain-based planners are feasible.
    """
    opt = opt or PlannerOptions()
    sessions = sorted(sessions, key=lambda s: s.id)
    return float(_gs_sweep(sessions, apps, gs, p, opt)[2].max())


def maxcap(sessions: Sequence[Session], apps: dict[str, UavState], gs: UavState,
           p: LinkModelParams, opt: PlannerOptions | None = None) -> NetworkConfig:
    """Dedicated chains sized for capacity rather than relay count.

    Each GS radio is split across its sessions in proportion to demand and
    every session takes the longest hop its share supports, with no relay
    sharing across sessions. The GS yaw maximises the worst ratio of peak
    GS-link capacity to sector demand; relay count plays no part in it.
    """
    opt = opt or PlannerOptions()
    sessions = sorted(sessions, key=lambda s: s.id)
    phis, sectors, headroom, w, table, demand = _gs_sweep(sessions, apps, gs, p, opt)
    i = int(np.flatnonzero(headroom >= headroom.max() - 1e-12)[0])
    chosen = np.zeros(len(sessions), dtype=int)
    for m in np.unique(sectors[i]):
        idx = np.flatnonzero(sectors[i] == m)
        hops = _proportional_hops(w[i, idx], demand[idx])
        if hops is None:
            raise Infeasible("the ground-station radios cannot give every session a proportional share")
        chosen[idx] = hops
    hops = {s.id: int(chosen[k]) for k, s in enumerate(sessions)}
    tilts = {s.id: float(table.tilt[k, chosen[k] - 1]) for k, s in enumerate(sessions)}
    cfg = chain_config(sessions, apps, gs, float(phis[i]), hops, p, opt, tilts=tilts)
    return _finish(cfg, sessions, p, opt)


def air_part(sessions: Sequence[Session], apps: dict[str, UavState], gs: UavState,
             p: LinkModelParams, opt: PlannerOptions | None = None) -> NetworkConfig:
    """Radial stage only, no merging across sessions."""
    return radial_optimize(sessions, apps, gs, p, opt)


def min_drone(sessions: Sequence[Session], apps: dict[str, UavState], gs: UavState,
              p: LinkModelParams, opt: PlannerOptions | None = None) -> NetworkConfig:
    """No relays: apps face the GS and only the GS yaw is optimised."""
    opt = opt or PlannerOptions()
    sessions = sorted(sessions, key=lambda s: s.id)
    uavs = {gs.id: gs}
    routes = {}
    traffic: dict[str, float] = {}
    for s in sessions:
        app = apps[s.app_uav]
        uavs[app.id] = app.moved(yaw=bearing(app.pos, gs.pos))
        routes[s.id] = (app.id, gs.id)
        traffic[app.id] = traffic.get(app.id, 0.0) + s.demand
    reachable = [a for a in sorted(traffic)
                 if capacity(planar_distance(uavs[a].pos, gs.pos), 0.0, p) >= p.conn_threshold]
    if reachable:
        nbrs = [OrientNeighbor(uavs[a].pos, uavs[a].yaw, traffic[a], uavs[a].num_radios) for a in reachable]
        try:
            uavs[gs.id] = gs.moved(yaw=solve_orient(gs.pos, nbrs, p, opt, gs.num_radios).phi)
        except NoOrientation:
            pass
    cfg = NetworkConfig(uavs, routes, {}, 1.0)
    return with_shares(cfg, evaluate(cfg, sessions, p))


ALGORITHMS = {
    "steiner-mst": steiner_mst,
    "maxcap": maxcap,
    "air-part": air_part,
    "min-drone": min_drone,
}
