import math

import pytest
from hypothesis import given, strategies as st

from aeromesh.core_types import (
    NetworkConfig,
    PolarPos,
    Role,
    Session,
    UavState,
    angular_distance,
    bearing,
    edge_key,
    from_cartesian,
    normalize_angle,
    planar_distance,
    to_cartesian,
)
from aeromesh.errors import CoincidentPositions

angles = st.floats(-50.0, 50.0, allow_nan=False)
radii = st.floats(0.0, 5000.0, allow_nan=False)


def test_to_cartesian_examples():
    assert to_cartesian(PolarPos(0, 0, 60)) == (0.0, 0.0, 60)
    x, y, z = to_cartesian(PolarPos(100, math.pi / 2, 60))
    assert x == pytest.approx(0, abs=1e-9) and y == pytest.approx(100) and z == 60
    x, y, _ = to_cartesian(PolarPos(100, math.pi / 4, 60))
    assert (round(x, 2), round(y, 2)) == (70.71, 70.71)


def test_bearing_examples():
    origin = PolarPos(0, 0)
    assert bearing(origin, PolarPos(50, math.pi)) == pytest.approx(math.pi)
    assert bearing(PolarPos(100, 0), origin) == pytest.approx(math.pi)
    assert bearing(PolarPos(100, 0), PolarPos(100, math.pi / 2)) == pytest.approx(3 * math.pi / 4)


def test_bearing_coincident_raises():
    with pytest.raises(CoincidentPositions):
        bearing(PolarPos(10, 1.0), PolarPos(10, 1.0 + 2 * math.pi))


def test_angular_distance_examples():
    assert angular_distance(0, 0) == 0
    assert angular_distance(0.1, 2 * math.pi - 0.1) == pytest.approx(0.2)
    assert angular_distance(math.pi / 2, 3 * math.pi / 2) == pytest.approx(math.pi)


def test_polar_pos_rejects_negative_radius_and_altitude():
    with pytest.raises(ValueError):
        PolarPos(-1, 0)
    with pytest.raises(ValueError):
        PolarPos(1, 0, -5)


def test_origin_has_pinned_theta():
    assert PolarPos(0, 1.3) == PolarPos(0, 0)


@given(angles)
def test_normalize_angle_range(a):
    n = normalize_angle(a)
    assert 0.0 <= n < 2 * math.pi
    assert math.isclose(math.cos(n), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(n), math.sin(a), abs_tol=1e-9)


@given(angles, angles)
def test_angular_distance_symmetric_and_bounded(a, b):
    d = angular_distance(a, b)
    assert 0.0 <= d <= math.pi + 1e-12
    assert d == pytest.approx(angular_distance(b, a), abs=1e-12)


@given(radii, angles)
def test_cartesian_round_trip(r, theta):
    p = PolarPos(r, theta)
    q = from_cartesian(*to_cartesian(p))
    assert planar_distance(p, q) <= 1e-7 * max(1.0, r)


@given(radii, angles, radii, angles)
def test_bearing_reverses(r1, t1, r2, t2):
    a, b = PolarPos(r1, t1), PolarPos(r2, t2)
    if planar_distance(a, b) < 1e-6:
        return
    assert angular_distance(bearing(a, b) + math.pi, bearing(b, a)) < 1e-9


def test_uav_state_validation():
    with pytest.raises(ValueError):
        UavState("u", Role.RELAY, PolarPos(1, 0), num_radios=0)
    with pytest.raises(ValueError):
        UavState("u", Role.RELAY, PolarPos(1, 0), energy=1.5)
    u = UavState("u", Role.RELAY, PolarPos(1, 0), yaw=-math.pi / 2, num_radios=4)
    assert u.yaw == pytest.approx(3 * math.pi / 2)
    assert u.boresight(1) == pytest.approx(0.0, abs=1e-12)


def test_session_demand_positive():
    with pytest.raises(ValueError):
        Session("s", "A", 0.0, "GS")


def test_network_config_queries():
    uavs = {k: UavState(k, role, PolarPos(r, 0)) for k, role, r in
            [("GS", Role.GROUND_STATION, 0), ("R", Role.RELAY, 100), ("A", Role.APPLICATION, 200),
             ("B", Role.APPLICATION, 150)]}
    cfg = NetworkConfig(uavs, {"s1": ("A", "R", "GS"), "s2": ("B", "R", "GS")})
    assert cfg.relay_count == 1
    assert cfg.neighbors("R") == ["A", "B", "GS"]
    assert cfg.sessions_through("R") == {"s1", "s2"}
    assert cfg.link_loads({"s1": 100, "s2": 50})[edge_key("R", "GS")] == 150
    assert sorted(cfg.edges()) == sorted({edge_key("A", "R"), edge_key("R", "GS"), edge_key("B", "R")})
    dup = cfg.copy()
    dup.routes["s1"] = ("A", "GS")
    assert cfg.routes["s1"] == ("A", "R", "GS")
