"""De-conflicted migration between two deployments.

The old and new positions are paired by a min-max (bottleneck) matching so
the longest leg is as short as possible. Legs that cross or pass too close
are put on different altitude layers by colouring their conflict graph, and
the move runs in three phases: climb/descend to the layer, translate, return.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import networkx as nx
import numpy as np

from .core_types import OPERATING_ALTITUDE

XY = tuple[float, float]

EXACT_COLORING_LIMIT = 12


@dataclass(frozen=True)
class Matching:
    pairs: list[tuple[XY, XY]]
    max_weight: float
    # index into the old list -> index into the new list
    assignment: tuple[int, ...] = ()


@dataclass(frozen=True)
class Leg:
    uav: str
    old: XY
    new: XY
    layer: int
    altitude: float

    @property
    def planar_length(self) -> float:
        return math.hypot(self.new[0] - self.old[0], self.new[1] - self.old[1])


@dataclass
class MigrationPlan:
    assignments: list[Leg]
    dz: float = 10.0
    speed: float = 5.0
    operating_alt: float = OPERATING_ALTITUDE
    # start and end time of each phase: ascend/descend to layer, translate, return
    phases: list[tuple[float, float]] = field(default_factory=list)
    makespan: float = 0.0

    def position(self, leg: Leg, t: float) -> tuple[float, float, float]:
        """3-D position of one UAV at time ``t`` since migration start."""
        (t0, t1), (_, t2), (_, t3) = self.phases
        climb = abs(leg.altitude - self.operating_alt)
        step = math.copysign(1.0, leg.altitude - self.operating_alt)
        if t <= t1:
            z = self.operating_alt + step * min(climb, self.speed * max(t - t0, 0.0))
            return (leg.old[0], leg.old[1], z)
        if t <= t2:
            length = leg.planar_length
            frac = 1.0 if length == 0.0 else min(1.0, self.speed * (t - t1) / length)
            return (leg.old[0] + frac * (leg.new[0] - leg.old[0]),
                    leg.old[1] + frac * (leg.new[1] - leg.old[1]), leg.altitude)
        z = leg.altitude - step * min(climb, self.speed * (t - t2))
        return (leg.new[0], leg.new[1], z)


# ---------------------------------------------------------------- matching

def _dist(a: XY, b: XY) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def m2bm(old: Sequence[XY], new: Sequence[XY]) -> Matching:
    """Perfect matching minimising the longest old-to-new distance.

    Edges are inserted shortest first and the matching (a unit-capacity
    source-to-sink flow) is grown by augmenting paths after each insertion;
    the first perfect matching found is bottleneck-optimal.
    """
    n = len(old)
    if n != len(new) or n == 0:
        raise ValueError("old and new must be non-empty and the same size")
    edges = sorted((_dist(old[i], new[j]), i, j) for i in range(n) for j in range(n))
    adj: list[list[int]] = [[] for _ in range(n)]
    match_left = [-1] * n
    match_right = [-1] * n
    left_seen = [False] * n
    right_seen = [False] * n
    size = 0
    weight = 0.0

    def augment(u: int, visited: list[bool]) -> bool:
        # iterative DFS over alternating paths starting at free left vertex u
        stack = [(u, iter(adj[u]))]
        parent: dict[int, tuple[int, int]] = {}
        while stack:
            left, it = stack[-1]
            advanced = False
            for right in it:
                if visited[right]:
                    continue
                visited[right] = True
                if match_right[right] == -1:
                    # flip the path back to u
                    while True:
                        prev_right = match_left[left]
                        match_left[left] = right
                        match_right[right] = left
                        if left == u:
                            return True
                        left, right = parent[left][0], prev_right
                    # unreachable
                nxt = match_right[right]
                parent[nxt] = (left, right)
                stack.append((nxt, iter(adj[nxt])))
                advanced = True
                break
            if not advanced:
                stack.pop()
        return False

    for length, i, j in edges:
        adj[i].append(j)
        left_seen[i] = True
        right_seen[j] = True
        weight = length
        if match_left[i] == -1 and match_right[j] == -1:
            match_left[i], match_right[j] = j, i
            size += 1
        if size < n and all(left_seen) and all(right_seen):
            # until every vertex has an edge no perfect matching can exist,
            # so the flow is only pushed to its maximum from here on
            grew = True
            while grew and size < n:
                grew = False
                visited = [False] * n
                for u in range(n):
                    if match_left[u] == -1 and augment(u, visited):
                        size += 1
                        grew = True
                        break
        if size == n:
            break
    else:
        raise AssertionError("complete bipartite graph must admit a perfect matching")
    pairs = [(tuple(old[i]), tuple(new[match_left[i]])) for i in range(n)]
    return Matching(pairs, weight, tuple(match_left))


def bottleneck_bruteforce(old: Sequence[XY], new: Sequence[XY]) -> float:
    """Minimum over all n! permutations of the longest leg."""
    n = len(old)
    return min(max(_dist(old[i], new[perm[i]]) for i in range(n))
               for perm in itertools.permutations(range(n)))


# ---------------------------------------------------------------- conflicts

def _orient(a: XY, b: XY, c: XY) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a: XY, b: XY, c: XY) -> bool:
    return (min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
            and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12)


def segments_intersect(p1: XY, p2: XY, q1: XY, q2: XY) -> bool:
    d1, d2 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    d3, d4 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    return ((d1 == 0 and _on_segment(q1, q2, p1)) or (d2 == 0 and _on_segment(q1, q2, p2))
            or (d3 == 0 and _on_segment(p1, p2, q1)) or (d4 == 0 and _on_segment(p1, p2, q2)))


def _point_segment(p: XY, a: XY, b: XY) -> float:
    dx, dy = b[0] - a[0], b[1] - a[1]
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return _dist(p, a)
    t = max(0.0, min(1.0, ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / denom))
    return _dist(p, (a[0] + t * dx, a[1] + t * dy))


def segment_distance(p1: XY, p2: XY, q1: XY, q2: XY) -> float:
    if segments_intersect(p1, p2, q1, q2):
        return 0.0
    return min(_point_segment(p1, q1, q2), _point_segment(p2, q1, q2),
               _point_segment(q1, p1, p2), _point_segment(q2, p1, p2))


def conflict_graph(m: Matching, d_min: float = 5.0) -> nx.Graph:
    """Legs are vertices; an edge joins legs that cross or pass within ``d_min``."""
    if d_min < 0:
        raise ValueError("d_min must be >= 0")
    g = nx.Graph()
    for k, (a, b) in enumerate(m.pairs):
        g.add_node(k, old=a, new=b)
    for k, l in itertools.combinations(range(len(m.pairs)), 2):
        (a, b), (c, d) = m.pairs[k], m.pairs[l]
        if segments_intersect(a, b, c, d) or segment_distance(a, b, c, d) < d_min:
            g.add_edge(k, l)
    return g


# ---------------------------------------------------------------- colouring

def _exact_coloring(g: nx.Graph) -> dict:
    """Minimum colouring by branch and bound over k = lower bound, lower bound + 1, ..."""
    nodes = sorted(g.nodes, key=lambda v: (-g.degree(v), v))
    if not nodes:
        return {}
    nbrs = {v: set(g.neighbors(v)) for v in nodes}
    clique = max((len(c) for c in nx.find_cliques(g)), default=1)

    def attempt(k: int):
        colors: dict = {}

        def pick():
            # most constrained uncoloured vertex first
            best, best_key = None, None
            for v in nodes:
                if v in colors:
                    continue
                sat = len({colors[u] for u in nbrs[v] if u in colors})
                key = (-sat, -len(nbrs[v]))
                if best_key is None or key < best_key:
                    best, best_key = v, key
            return best

        def rec() -> bool:
            v = pick()
            if v is None:
                return True
            used = {colors[u] for u in nbrs[v] if u in colors}
            top = max(colors.values(), default=-1)
            # symmetry break: never open more than one fresh colour
            for c in range(min(k, top + 2)):
                if c in used:
                    continue
                colors[v] = c
                if rec():
                    return True
                del colors[v]
            return False

        return dict(colors) if rec() else None

    for k in range(clique, len(nodes) + 1):
        found = attempt(k)
        if found is not None:
            return found
    raise AssertionError("a graph is always colourable with |V| colours")


def color_graph(g: nx.Graph, level: Sequence = ()) -> dict:
    """Proper colouring; exact per component up to 12 vertices, DSATUR above.

    Colours are relabelled so colour 0 is the largest class. Vertices listed in
    ``level`` (for instance UAVs that should hold their altitude) are put in
    colour 0 together as far as they are mutually non-adjacent; the rest of
    the graph is then coloured minimally under that constraint.
    """
    keep: list = []
    for v in sorted(v for v in level if v in g):
        if not any(g.has_edge(v, u) for u in keep):
            keep.append(v)
    h = g
    if len(keep) > 1:
        h = g.copy()
        for v in keep[1:]:
            h = nx.contracted_nodes(h, keep[0], v, self_loops=False, copy=False)

    raw: dict = {}
    for comp in sorted(nx.connected_components(h), key=lambda c: min(c)):
        sub = h.subgraph(comp)
        if len(comp) <= EXACT_COLORING_LIMIT:
            raw.update(_exact_coloring(sub))
        else:
            raw.update(nx.coloring.greedy_color(sub, strategy="saturation_largest_first"))
    for v in keep[1:]:
        raw[v] = raw[keep[0]]
    sizes: dict[int, int] = {}
    for c in raw.values():
        sizes[c] = sizes.get(c, 0) + 1
    first = [raw[keep[0]]] if keep else []
    order = first + sorted((c for c in sizes if c not in first), key=lambda c: (-sizes[c], c))
    relabel = {c: k for k, c in enumerate(order)}
    return {v: relabel[c] for v, c in raw.items()}


def chromatic_bruteforce(g: nx.Graph) -> int:
    """Smallest k admitting a proper colouring, by enumerating all k^|V| assignments."""
    nodes = list(g.nodes)
    if not nodes:
        return 0
    index = {v: i for i, v in enumerate(nodes)}
    edges = [(index[u], index[v]) for u, v in g.edges]
    for k in range(1, len(nodes) + 1):
        for colors in itertools.product(range(k), repeat=len(nodes)):
            if all(colors[a] != colors[b] for a, b in edges):
                return k
    return len(nodes)


def is_proper(g: nx.Graph, coloring: dict) -> bool:
    return all(coloring[u] != coloring[v] for u, v in g.edges) and set(coloring) == set(g.nodes)


# ---------------------------------------------------------------- schedule

def layer_altitude(color: int, dz: float, operating_alt: float) -> float:
    """0 -> operating altitude, 1 -> +dz, 2 -> -dz, 3 -> +2dz, ..."""
    if color == 0:
        return operating_alt
    rank = (color + 1) // 2
    return operating_alt + rank * dz if color % 2 else operating_alt - rank * dz


def build_plan(m: Matching, coloring: dict, dz: float = 10.0, speed: float = 5.0,
               operating_alt: float = OPERATING_ALTITUDE, uav_ids: Sequence[str] | None = None) -> MigrationPlan:
    if speed <= 0 or dz <= 0:
        raise ValueError("speed and dz must be > 0")
    ids = list(uav_ids) if uav_ids is not None else [f"U{k}" for k in range(len(m.pairs))]
    legs = []
    for k, (a, b) in enumerate(m.pairs):
        c = coloring.get(k, 0)
        legs.append(Leg(ids[k], a, b, c, layer_altitude(c, dz, operating_alt)))
    vertical = max((abs(l.altitude - operating_alt) for l in legs), default=0.0)
    planar = max((l.planar_length for l in legs), default=0.0)
    t1 = vertical / speed
    t2 = t1 + planar / speed
    t3 = t2 + vertical / speed
    return MigrationPlan(legs, dz, speed, operating_alt, [(0.0, t1), (t1, t2), (t2, t3)], t3)


def plan_migration(old: Sequence[XY], new: Sequence[XY], d_min: float = 5.0, dz: float = 10.0,
                   speed: float = 5.0, operating_alt: float = OPERATING_ALTITUDE,
                   uav_ids: Sequence[str] | None = None) -> MigrationPlan:
    """Matching, conflict graph, colouring and schedule in one call."""
    m = m2bm(old, new)
    coloring = color_graph(conflict_graph(m, d_min))
    return build_plan(m, coloring, dz, speed, operating_alt, uav_ids)


def sample_positions(plan: MigrationPlan, dt: float) -> np.ndarray:
    """Positions of every UAV at t = 0, dt, 2dt, ... and at the makespan: shape (T, n, 3)."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    times = list(np.arange(0.0, plan.makespan, dt)) + [plan.makespan]
    return np.array([[plan.position(leg, t) for leg in plan.assignments] for t in times])


def verify_plan(plan: MigrationPlan, d_min: float = 5.0, dt: float = 0.1) -> bool:
    """True iff every sampled pair of UAVs stays at least ``d_min`` apart in 3-D."""
    if len(plan.assignments) < 2:
        return True
    pos = sample_positions(plan, dt)
    diff = pos[:, :, None, :] - pos[:, None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=3))
    n = pos.shape[1]
    dist[:, np.arange(n), np.arange(n)] = np.inf
    return bool(dist.min() >= d_min - 1e-9)
