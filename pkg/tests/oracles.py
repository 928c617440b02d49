"""Slow, independent reference implementations used to check the library.

Nothing here imports the code under test beyond plain data types, so a bug
in the library cannot hide in its own oracle.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog


def capacity_ref(distance, dphi, p):
    """The clamped quadratic surface evaluated term by term."""
    if abs(dphi) > p.max_fov:
        return 0.0
    raw = (p.a * distance ** 2 + p.b * dphi ** 2 + p.c * dphi * distance
           + p.d * distance + p.e * dphi + p.f)
    return min(max(raw, 0.0), p.rate_cap)


def circ_dist(a, b):
    d = (a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def radio_ref(yaw, num_radios, target):
    """Radio whose boresight is nearest the target bearing, and that distance."""
    best = min(range(num_radios), key=lambda m: circ_dist(target, yaw + 2 * math.pi * m / num_radios))
    return best, circ_dist(target, yaw + 2 * math.pi * best / num_radios)


def xy(pos):
    return (pos.r * math.cos(pos.theta), pos.r * math.sin(pos.theta))


def bearing_ref(a, b):
    (ax, ay), (bx, by) = xy(a), xy(b)
    return math.atan2(by - ay, bx - ax) % (2 * math.pi)


def link_ref(u, v, p):
    """Capacity, serving radio at u and serving radio at v for one link."""
    (ax, ay), (bx, by) = xy(u.pos), xy(v.pos)
    dist = math.hypot(bx - ax, by - ay)
    b_uv = bearing_ref(u.pos, v.pos)
    ru, au = radio_ref(u.yaw, u.num_radios, b_uv)
    rv, av = radio_ref(v.yaw, v.num_radios, (b_uv + math.pi) % (2 * math.pi))
    dphi = au + av if p.combine == "sum" else max(au, av)
    return capacity_ref(dist, dphi, p), ru, rv


def bottleneck_ref(old, new):
    n = len(old)
    return min(max(math.dist(old[i], new[perm[i]]) for i in range(n))
               for perm in itertools.permutations(range(n)))


def chromatic_ref(nodes, edges):
    """Smallest k with a proper k-colouring, by trying every assignment."""
    nodes = list(nodes)
    if not nodes:
        return 0
    idx = {v: i for i, v in enumerate(nodes)}
    pairs = [(idx[a], idx[b]) for a, b in edges]
    for k in range(1, len(nodes) + 1):
        # fixing the first vertex's colour loses nothing by symmetry
        for rest in itertools.product(range(k), repeat=len(nodes) - 1):
            colors = (0,) + rest
            if all(colors[a] != colors[b] for a, b in pairs):
                return k
    return len(nodes)


def common_lambda_lp(cfg, sessions, p):
    """Largest λ such that shares exist giving every session λ·T, via an LP.

    Variables: λ and one share per (endpoint, link). Constraints: shares on
    each radio sum to at most 1 and every endpoint share carries λ times the
    link's total load.
    """
    loads = {}
    for s in sessions:
        path = cfg.routes[s.id]
        for u, v in zip(path, path[1:]):
            key = tuple(sorted((u, v)))
            loads[key] = loads.get(key, 0.0) + s.demand
    if not loads:
        return math.inf
    ends = []
    caps = {}
    for (u, v) in sorted(loads):
        cap, ru, rv = link_ref(cfg.uavs[u], cfg.uavs[v], p)
        caps[(u, v)] = cap
        if cap < p.conn_threshold:
            return 0.0
        ends.append(((u, v), u, ru))
        ends.append(((u, v), v, rv))
    nvar = 1 + len(ends)
    a_ub, b_ub = [], []
    radios = {}
    for k, (_, node, radio) in enumerate(ends):
        radios.setdefault((node, radio), []).append(k)
    for members in radios.values():
        row = np.zeros(nvar)
        row[[1 + k for k in members]] = 1.0
        a_ub.append(row)
        b_ub.append(1.0)
    for k, (edge, _, _) in enumerate(ends):
        # λ·load - γ·cap <= 0
        row = np.zeros(nvar)
        row[0] = loads[edge]
        row[1 + k] = -caps[edge]
        a_ub.append(row)
        b_ub.append(0.0)
    cost = np.zeros(nvar)
    cost[0] = -1.0
    res = linprog(cost, A_ub=np.array(a_ub), b_ub=np.array(b_ub),
                  bounds=[(0, None)] + [(0, 1)] * len(ends), method="highs")
    assert res.status == 0, res.message
    return float(res.x[0])


def orient_grid(pos, neighbors, p, num_radios, step_deg=0.05):
    """Best worst-sector λ over a dense yaw grid; the sector LP is solved in closed form.

    ``neighbors`` holds (pos, yaw, demand, num_radios) tuples.
    """
    width = 2 * math.pi / num_radios
    phis = np.arange(0.0, width, math.radians(step_deg))
    best = -math.inf
    best_phi = 0.0
    for phi in phis:
        per_radio = {}
        for npos, nyaw, demand, nr in neighbors:
            (ax, ay), (bx, by) = xy(pos), xy(npos)
            dist = math.hypot(bx - ax, by - ay)
            b = math.atan2(by - ay, bx - ax) % (2 * math.pi)
            m, a_near = radio_ref(phi, num_radios, b)
            _, a_far = radio_ref(nyaw, nr, (b + math.pi) % (2 * math.pi))
            dphi = a_near + a_far if p.combine == "sum" else max(a_near, a_far)
            cap = capacity_ref(dist, dphi, p)
            # below the connectivity threshold there is no link at all
            per_radio[m] = per_radio.get(m, 0.0) + (math.inf if cap < p.conn_threshold else demand / cap)
        lam = min(1.0 / v if v > 0 else math.inf for v in per_radio.values())
        if lam > best:
            best, best_phi = lam, float(phi)
    return best_phi, best


def share_grid_two_flows(c1, t1, c2, t2, steps=10000):
    """Two flows on one radio: best min satisfaction over a grid of airtime splits."""
    g = np.linspace(0.0, 1.0, steps + 1)
    return float(np.max(np.minimum(g * c1 / t1, (1 - g) * c2 / t2)))


def chromatic_ie(nodes, edges):
    """Chromatic number by inclusion-exclusion over independent-set counts.

    k colours suffice iff sum over S of (-1)^(n-|S|) * i(S)^k > 0, where i(S)
    counts the independent sets inside S (the empty set included). Exact
    integer arithmetic; fine up to a dozen or so vertices.
    """
    nodes = list(nodes)
    n = len(nodes)
    if n == 0:
        return 0
    idx = {v: i for i, v in enumerate(nodes)}
    adj = [0] * n
    for a, b in edges:
        adj[idx[a]] |= 1 << idx[b]
        adj[idx[b]] |= 1 << idx[a]
    full = 1 << n
    count = [0] * full
    count[0] = 1
    for mask in range(1, full):
        low = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << low)
        # independent iff rest is independent and the low vertex has no neighbour in rest
        count[mask] = 1 if count[rest] and not (adj[low] & rest) else 0
    for i in range(n):
        bit = 1 << i
        for mask in range(full):
            if mask & bit:
                count[mask] += count[mask ^ bit]
    for k in range(1, n + 1):
        total = sum((-1) ** (n - bin(s).count("1")) * count[s] ** k for s in range(full))
        if total > 0:
            return k
    return n
