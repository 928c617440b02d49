"""60 GHz UAV-to-UAV capacity surface and its helpers.

Capacity is a clamped quadratic in distance ``D`` (m) and misalignment
``dphi`` (rad)::

    C = a*D^2 + b*dphi^2 + c*dphi*D + d*D + e*dphi + f

The coefficients are data: the defaults are fitted from the bundled anchor
table (``data/default_anchors.json``) and shipped as golden values in
``data/default_params.json``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields, replace
from functools import lru_cache
from importlib import resources
from typing import Sequence

import numpy as np

from .core_types import UavState, angular_distance, bearing, normalize_angle, planar_distance, TWO_PI
from .errors import (
    CoincidentPositions,
    DemandUnsatisfiableAtAnyRange,
    NonPositiveDistance,
    SingularDesign,
)

COMBINE_MODES = ("sum", "max")


@dataclass(frozen=True)
class LinkModelParams:
    a: float
    b: float
    c: float
    d: float
    e: float
    f: float
    conn_threshold: float = 100.0
    rate_cap: float = 2310.0
    max_fov: float = math.radians(85.0)
    # how the two per-end misalignments combine into the model's dphi
    combine: str = "sum"

    def __post_init__(self):
        if not self.rate_cap > self.conn_threshold > 0:
            raise ValueError("need rate_cap > conn_threshold > 0")
        if self.combine not in COMBINE_MODES:
            raise ValueError(f"combine must be one of {COMBINE_MODES}")

    @property
    def coefficients(self) -> tuple[float, ...]:
        return (self.a, self.b, self.c, self.d, self.e, self.f)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> LinkModelParams:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown link model fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class AnchorSample:
    distance: float
    dphi: float
    throughput: float
    weight: float = 1.0

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError("anchor distance must be > 0")
        if not self.weight > 0:
            raise ValueError("anchor weight must be > 0")
        if self.throughput < 0:
            raise ValueError("anchor throughput must be >= 0")


def _raw(distance, dphi, p: LinkModelParams):
    return (p.a * distance * distance + p.b * dphi * dphi + p.c * dphi * distance
            + p.d * distance + p.e * dphi + p.f)


def capacity(distance: float, dphi: float, p: LinkModelParams) -> float:
    """Expected link throughput in Mbps, clamped to [0, rate_cap]."""
    if not distance > 0:
        raise NonPositiveDistance(f"distance must be > 0, got {distance}")
    if abs(dphi) > p.max_fov:
        return 0.0
    return min(max(_raw(distance, dphi, p), 0.0), p.rate_cap)


def capacity_array(distance, dphi, p: LinkModelParams) -> np.ndarray:
    """Vectorised :func:`capacity`; callers guarantee positive distances."""
    distance = np.asarray(distance, dtype=float)
    dphi = np.asarray(dphi, dtype=float)
    out = np.clip(_raw(distance, dphi, p), 0.0, p.rate_cap)
    return np.where(np.abs(dphi) > p.max_fov, 0.0, out)


def combine_misalignment(alpha_u: float, alpha_v: float, p: LinkModelParams):
    if p.combine == "sum":
        return alpha_u + alpha_v
    return np.maximum(alpha_u, alpha_v) if isinstance(alpha_u, np.ndarray) else max(alpha_u, alpha_v)


def serving_radio(u: UavState, target_bearing: float) -> int:
    """Index of the radio whose sector [boresight - π/M, boresight + π/M) holds the bearing."""
    width = TWO_PI / u.num_radios
    rel = normalize_angle(target_bearing - u.yaw + width / 2.0)
    return min(int(rel // width), u.num_radios - 1)


def misalignment(u: UavState, target_bearing: float) -> float:
    """Angle between the bearing and the boresight of the radio that serves it."""
    return angular_distance(target_bearing, u.boresight(serving_radio(u, target_bearing)))


def misalignment_for_yaws(yaws: np.ndarray, num_radios: int, target_bearing: float) -> np.ndarray:
    """Vectorised misalignment of one bearing over many candidate yaws."""
    width = TWO_PI / num_radios
    rel = np.mod(target_bearing - yaws + width / 2.0, TWO_PI)
    return np.abs(np.mod(rel, width) - width / 2.0)


def radio_for_yaws(yaws: np.ndarray, num_radios: int, target_bearing: float) -> np.ndarray:
    width = TWO_PI / num_radios
    rel = np.mod(target_bearing - yaws + width / 2.0, TWO_PI)
    return np.minimum((rel // width).astype(int), num_radios - 1)


def link_capacity(u: UavState, v: UavState, p: LinkModelParams) -> float:
    dist = planar_distance(u.pos, v.pos)
    if dist == 0.0:
        raise CoincidentPositions(f"{u.id} and {v.id} share a planar position")
    b_uv = bearing(u.pos, v.pos)
    b_vu = normalize_angle(b_uv + math.pi)
    dphi = combine_misalignment(misalignment(u, b_uv), misalignment(v, b_vu), p)
    return capacity(dist, dphi, p)


def is_connected(u: UavState, v: UavState, p: LinkModelParams) -> bool:
    try:
        return link_capacity(u, v, p) >= p.conn_threshold
    except CoincidentPositions:
        return False


def max_range(demand: float, dphi: float, p: LinkModelParams) -> float:
    """Largest distance at which ``capacity(D, dphi) >= demand``.

    Works on the branch of the quadratic that is feasible at short range; a
    convex surface that never drops below the demand yields ``inf``.
    """
    if not 0 < demand <= p.rate_cap or abs(dphi) > p.max_fov:
        raise DemandUnsatisfiableAtAnyRange(f"{demand} Mbps at {math.degrees(dphi):.1f} deg")
    qa = p.a
    qb = p.c * dphi + p.d
    qc = p.b * dphi * dphi + p.e * dphi + p.f - demand
    if qa == 0.0:
        if qb >= 0.0:
            if qc >= 0.0:
                return math.inf
            raise DemandUnsatisfiableAtAnyRange(f"{demand} Mbps unreachable")
        root = -qc / qb
        if root <= 0.0:
            raise DemandUnsatisfiableAtAnyRange(f"{demand} Mbps unreachable")
        return root
    disc = qb * qb - 4.0 * qa * qc
    if disc < 0.0:
        if qa > 0.0:
            return math.inf
        raise DemandUnsatisfiableAtAnyRange(f"{demand} Mbps exceeds the surface peak")
    sq = math.sqrt(disc)
    lo, hi = sorted(((-qb - sq) / (2 * qa), (-qb + sq) / (2 * qa)))
    if qa < 0.0:
        if hi <= 0.0:
            raise DemandUnsatisfiableAtAnyRange(f"{demand} Mbps exceeds the surface peak")
        return hi
    if qc < 0.0:
        raise DemandUnsatisfiableAtAnyRange(f"{demand} Mbps not met at short range")
    return lo if lo > 0.0 else math.inf


def fit_params(samples: Sequence[AnchorSample], **overrides) -> LinkModelParams:
    """Weighted least-squares fit of the six coefficients via normal equations.

    Columns are rescaled before forming the normal matrix so the metre-squared
    term does not swamp the radian terms.
    """
    if len(samples) < 6:
        raise SingularDesign(f"need at least 6 samples, got {len(samples)}")
    dist = np.array([s.distance for s in samples], dtype=float)
    phi = np.array([s.dphi for s in samples], dtype=float)
    y = np.array([s.throughput for s in samples], dtype=float)
    w = np.array([s.weight for s in samples], dtype=float)
    design = np.column_stack([dist**2, phi**2, phi * dist, dist, phi, np.ones_like(dist)])
    scale = np.abs(design).max(axis=0)
    if np.any(scale == 0.0):
        raise SingularDesign("a design column is identically zero")
    scaled = design / scale
    root_w = np.sqrt(w)[:, None]
    if np.linalg.matrix_rank(scaled * root_w) < 6:
        raise SingularDesign("anchor samples do not determine all six coefficients")
    normal = scaled.T @ (scaled * w[:, None])
    rhs = scaled.T @ (w * y)
    beta = np.linalg.solve(normal, rhs) / scale
    a, b, c, d, e, f = (float(v) for v in beta)
    return LinkModelParams(a=a, b=b, c=c, d=d, e=e, f=f, **overrides)


def load_anchors(path=None) -> list[AnchorSample]:
    """Anchor table rows: distance (m), dphi (deg), throughput (Mbps), weight."""
    if path is None:
        text = resources.files("aeromesh").joinpath("data/default_anchors.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    rows = json.loads(text)["anchors"]
    return [AnchorSample(r["distance_m"], math.radians(r["dphi_deg"]), r["throughput_mbps"],
                         r.get("weight", 1.0)) for r in rows]


@lru_cache(maxsize=1)
def default_params() -> LinkModelParams:
    data = json.loads(resources.files("aeromesh").joinpath("data/default_params.json").read_text())
    data["max_fov"] = math.radians(data.pop("max_fov_deg"))
    return LinkModelParams(**data)


def with_combine(p: LinkModelParams, mode: str) -> LinkModelParams:
    return replace(p, combine=mode)


def connectivity_range(p: LinkModelParams, dphi: float = 0.0) -> float:
    return max_range(p.conn_threshold, dphi, p)
