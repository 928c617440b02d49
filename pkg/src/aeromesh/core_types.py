"""Geometry primitives and the network-state data model.

All planar positions are polar coordinates around the primary ground-station
UAV, which sits at the origin. Angles are radians everywhere in the library;
degrees only appear in the file formats.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Mapping

from .errors import CoincidentPositions

TWO_PI = 2.0 * math.pi
OPERATING_ALTITUDE = 60.0


def normalize_angle(a: float) -> float:
    """Wrap an angle into [0, 2π)."""
    a = math.fmod(a, TWO_PI)
    if a < 0.0:
        a += TWO_PI
    # fmod of a tiny negative number can land exactly on 2π after the add
    if a >= TWO_PI:
        a = 0.0
    return a


def angular_distance(a: float, b: float) -> float:
    """Minimal absolute separation of two angles on the circle, in [0, π]."""
    d = abs(normalize_angle(a) - normalize_angle(b))
    return min(d, TWO_PI - d)


@dataclass(frozen=True)
class PolarPos:
    r: float
    theta: float = 0.0
    altitude: float = OPERATING_ALTITUDE

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"radius must be non-negative, got {self.r}")
        if self.altitude < 0:
            raise ValueError(f"altitude must be non-negative, got {self.altitude}")
        # r == 0 has no meaningful direction; pin it so equal points compare equal
        theta = 0.0 if self.r == 0 else normalize_angle(self.theta)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "_xy", (self.r * math.cos(theta), self.r * math.sin(theta)))

    @property
    def xy(self) -> tuple[float, float]:
        return self._xy

    def with_altitude(self, altitude: float) -> PolarPos:
        return PolarPos(self.r, self.theta, altitude)


def to_cartesian(p: PolarPos) -> tuple[float, float, float]:
    x, y = p.xy
    return (x, y, p.altitude)


def from_cartesian(x: float, y: float, z: float = OPERATING_ALTITUDE) -> PolarPos:
    return PolarPos(math.hypot(x, y), math.atan2(y, x), z)


def planar_distance(a: PolarPos, b: PolarPos) -> float:
    ax, ay = a.xy
    bx, by = b.xy
    return math.hypot(bx - ax, by - ay)


def bearing(src: PolarPos, dst: PolarPos) -> float:
    """Azimuth in [0, 2π) of the planar line of sight from ``src`` to ``dst``."""
    ax, ay = src.xy
    bx, by = dst.xy
    dx, dy = bx - ax, by - ay
    if math.hypot(dx, dy) == 0.0:
        raise CoincidentPositions(f"{src} and {dst} share a planar position")
    return normalize_angle(math.atan2(dy, dx))


class Role(str, enum.Enum):
    GROUND_STATION = "GroundStation"
    RELAY = "Relay"
    APPLICATION = "Application"


@dataclass(frozen=True)
class UavState:
    """One UAV. Radio ``m`` points at ``yaw + m * 2π / num_radios``."""

    id: str
    role: Role
    pos: PolarPos
    yaw: float = 0.0
    num_radios: int = 3
    energy: float = 1.0

    def __post_init__(self):
        if self.num_radios < 1:
            raise ValueError(f"{self.id}: num_radios must be >= 1")
        if not 0.0 <= self.energy <= 1.0:
            raise ValueError(f"{self.id}: energy must lie in [0, 1], got {self.energy}")
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    @property
    def sector_width(self) -> float:
        return TWO_PI / self.num_radios

    def boresight(self, m: int) -> float:
        return normalize_angle(self.yaw + m * self.sector_width)

    def moved(self, pos: PolarPos | None = None, yaw: float | None = None) -> UavState:
        return replace(self, pos=self.pos if pos is None else pos,
                       yaw=self.yaw if yaw is None else yaw)


@dataclass(frozen=True)
class Session:
    id: str
    app_uav: str
    demand: float
    gs: str

    def __post_init__(self):
        if not self.demand > 0:
            raise ValueError(f"session {self.id}: demand must be > 0, got {self.demand}")


def edge_key(u: str, v: str) -> tuple[str, str]:
    """Undirected edge identifier with a deterministic order."""
    return (u, v) if u <= v else (v, u)


@dataclass
class NetworkConfig:
    """A deployment: UAV states, one non-split route per session, radio shares.

    ``routes[k]`` runs from the session's application UAV to its ground station.
    ``shares[(u, v)]`` is the airtime fraction of ``u``'s radio serving ``v``
    that is dedicated to link ``u-v``. ``lam`` is the satisfaction level the
    shares were sized for.
    """

    uavs: dict[str, UavState]
    routes: dict[str, tuple[str, ...]] = field(default_factory=dict)
    shares: dict[tuple[str, str], float] = field(default_factory=dict)
    lam: float = 1.0

    def __getitem__(self, uav_id: str) -> UavState:
        return self.uavs[uav_id]

    def copy(self) -> NetworkConfig:
        return NetworkConfig(dict(self.uavs), dict(self.routes), dict(self.shares), self.lam)

    def by_role(self, role: Role) -> list[UavState]:
        return [u for _, u in sorted(self.uavs.items()) if u.role == role]

    @property
    def relays(self) -> list[UavState]:
        return self.by_role(Role.RELAY)

    @property
    def relay_count(self) -> int:
        return sum(1 for u in self.uavs.values() if u.role == Role.RELAY)

    def link_loads(self, demands: Mapping[str, float]) -> dict[tuple[str, str], float]:
        """Total routed demand on every undirected edge."""
        loads: dict[tuple[str, str], float] = {}
        for sid, path in self.routes.items():
            for u, v in zip(path, path[1:]):
                key = edge_key(u, v)
                loads[key] = loads.get(key, 0.0) + demands[sid]
        return loads

    def neighbors(self, uav_id: str) -> list[str]:
        out = set()
        for path in self.routes.values():
            for u, v in zip(path, path[1:]):
                if u == uav_id:
                    out.add(v)
                elif v == uav_id:
                    out.add(u)
        return sorted(out)

    def sessions_through(self, uav_id: str) -> set[str]:
        return {sid for sid, path in self.routes.items() if uav_id in path}

    def edges(self) -> Iterator[tuple[str, str]]:
        seen = set()
        for _, path in sorted(self.routes.items()):
            for u, v in zip(path, path[1:]):
                key = edge_key(u, v)
                if key not in seen:
                    seen.add(key)
                    yield key


def sessions_by_id(sessions: Iterable[Session]) -> dict[str, Session]:
    return {s.id: s for s in sessions}
