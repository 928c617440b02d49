"""JSON-ready dicts for configurations and trace events.

Angles are degrees and rates Mbps at this boundary; internals use radians.
Floats are rounded so dumps stay short and diff cleanly.
"""
from __future__ import annotations

import json
import math
from typing import Any, Sequence

from .core_types import NetworkConfig, PolarPos, Role, Session, UavState
from .errors import ParseError

SCHEMA_VERSION = 1
DIGITS = 6


def rnd(x: float) -> float | None:
    if x is None:
        return None
    if math.isinf(x):
        return 1e300 if x > 0 else -1e300
    return round(float(x), DIGITS) + 0.0


def pos_to_dict(p: PolarPos) -> dict:
    return {"r_m": rnd(p.r), "theta_deg": rnd(math.degrees(p.theta)), "alt_m": rnd(p.altitude)}


def uav_to_dict(u: UavState) -> dict:
    return {
        "id": u.id,
        "role": u.role.value,
        "pos": pos_to_dict(u.pos),
        "yaw_deg": rnd(math.degrees(u.yaw)),
        "num_radios": u.num_radios,
        "energy": rnd(u.energy),
    }


def config_to_dict(cfg: NetworkConfig, sessions: Sequence[Session] | None = None) -> dict:
    """Config dump; with ``sessions`` it can be replayed through the referee on its own."""
    out = {
        "schema_version": SCHEMA_VERSION,
        "lam": rnd(cfg.lam),
        "uavs": [uav_to_dict(cfg.uavs[k]) for k in sorted(cfg.uavs)],
        "routes": {sid: list(path) for sid, path in sorted(cfg.routes.items())},
        "shares": [[u, v, rnd(s)] for (u, v), s in sorted(cfg.shares.items())],
    }
    if sessions is not None:
        out["sessions"] = [{"id": s.id, "app_uav": s.app_uav, "demand_mbps": rnd(s.demand), "gs": s.gs}
                           for s in sorted(sessions, key=lambda s: s.id)]
    return out


# ---------------------------------------------------------------- strict readers

def expect(obj: Any, kind: type | tuple, path: str):
    if isinstance(obj, bool) and kind in (int, float, (int, float)):
        raise ParseError(f"expected {_kind_name(kind)}, got boolean", path)
    if not isinstance(obj, kind):
        raise ParseError(f"expected {_kind_name(kind)}, got {type(obj).__name__}", path)
    return obj


def _kind_name(kind) -> str:
    if isinstance(kind, tuple):
        return "number"
    return {dict: "object", list: "array", str: "string", int: "integer", float: "number"}.get(kind, kind.__name__)


def number(obj: Any, path: str) -> float:
    value = float(expect(obj, (int, float), path))
    if not math.isfinite(value):
        raise ParseError("expected a finite number", path)
    return value


def fields(obj: Any, path: str, required: tuple[str, ...], optional: tuple[str, ...] = ()) -> dict:
    """Check an object has exactly the allowed keys."""
    expect(obj, dict, path)
    for key in obj:
        if key not in required and key not in optional:
            raise ParseError(f"unknown field {key!r}", f"{path}.{key}")
    for key in required:
        if key not in obj:
            raise ParseError(f"missing field {key!r}", path)
    return obj


def pos_from_dict(obj: Any, path: str) -> PolarPos:
    fields(obj, path, ("r_m", "theta_deg"), ("alt_m",))
    try:
        return PolarPos(number(obj["r_m"], f"{path}.r_m"),
                        math.radians(number(obj["theta_deg"], f"{path}.theta_deg")),
                        number(obj.get("alt_m", 60.0), f"{path}.alt_m"))
    except ValueError as e:
        raise ParseError(str(e), path) from None


def uav_from_dict(obj: Any, path: str) -> UavState:
    fields(obj, path, ("id", "role", "pos"), ("yaw_deg", "num_radios", "energy"))
    try:
        role = Role(expect(obj["role"], str, f"{path}.role"))
    except ValueError:
        raise ParseError(f"unknown role {obj['role']!r}", f"{path}.role") from None
    try:
        return UavState(expect(obj["id"], str, f"{path}.id"), role, pos_from_dict(obj["pos"], f"{path}.pos"),
                        math.radians(number(obj.get("yaw_deg", 0.0), f"{path}.yaw_deg")),
                        expect(obj.get("num_radios", 3), int, f"{path}.num_radios"),
                        number(obj.get("energy", 1.0), f"{path}.energy"))
    except ValueError as e:
        raise ParseError(str(e), path) from None


def sessions_from_config_dict(obj: Any, path: str = "$") -> list[Session]:
    out = []
    for k, item in enumerate(expect(obj.get("sessions", []), list, f"{path}.sessions")):
        where = f"{path}.sessions[{k}]"
        fields(item, where, ("id", "app_uav", "demand_mbps", "gs"))
        try:
            out.append(Session(expect(item["id"], str, f"{where}.id"), expect(item["app_uav"], str, f"{where}.app_uav"),
                               number(item["demand_mbps"], f"{where}.demand_mbps"), expect(item["gs"], str, f"{where}.gs")))
        except ValueError as e:
            raise ParseError(str(e), where) from None
    return out


def config_from_dict(obj: Any, path: str = "$") -> NetworkConfig:
    fields(obj, path, ("schema_version", "uavs", "routes"), ("shares", "lam", "sessions"))
    if obj["schema_version"] != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema_version {obj['schema_version']!r}", f"{path}.schema_version")
    uavs = {}
    for k, item in enumerate(expect(obj["uavs"], list, f"{path}.uavs")):
        u = uav_from_dict(item, f"{path}.uavs[{k}]")
        if u.id in uavs:
            raise ParseError(f"duplicate UAV id {u.id!r}", f"{path}.uavs[{k}].id")
        uavs[u.id] = u
    routes = {}
    for sid, route in expect(obj["routes"], dict, f"{path}.routes").items():
        hops = expect(route, list, f"{path}.routes.{sid}")
        routes[sid] = tuple(expect(h, str, f"{path}.routes.{sid}[{i}]") for i, h in enumerate(hops))
    shares = {}
    for k, item in enumerate(expect(obj.get("shares", []), list, f"{path}.shares")):
        where = f"{path}.shares[{k}]"
        if not isinstance(item, list) or len(item) != 3:
            raise ParseError("expected [from, to, share]", where)
        shares[(expect(item[0], str, where), expect(item[1], str, where))] = number(item[2], where)
    return NetworkConfig(uavs, routes, shares, number(obj.get("lam", 1.0), f"{path}.lam"))


def dumps(obj: Any) -> str:
    """Canonical JSON text: sorted keys, fixed separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def loads(text: str, path: str = "$") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}", path) from None
