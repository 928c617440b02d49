import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aeromesh.core_types import PolarPos, Role, UavState
from aeromesh.errors import DemandUnsatisfiableAtAnyRange, NonPositiveDistance, SingularDesign
from aeromesh.link_model import (
    AnchorSample,
    LinkModelParams,
    capacity,
    capacity_array,
    connectivity_range,
    default_params,
    fit_params,
    is_connected,
    link_capacity,
    load_anchors,
    max_range,
    misalignment,
    serving_radio,
    with_combine,
)

from oracles import capacity_ref

DEG = math.pi / 180

# golden coefficients produced by fitting the bundled anchor table
GOLDEN = {"a": -0.05192916416551466, "b": -1090.981136389753, "d": 4.154890706108126,
          "f": 2226.8774800609153}


def test_default_params_match_golden(p):
    for k, v in GOLDEN.items():
        assert getattr(p, k) == pytest.approx(v, rel=1e-9)
    assert abs(p.c) < 1e-9 and abs(p.e) < 1e-9
    assert p.combine == "sum" and p.conn_threshold == 100 and p.rate_cap == 2310


def test_refit_reproduces_golden(p):
    fitted = fit_params(load_anchors())
    for k in "abcdef":
        assert getattr(fitted, k) == pytest.approx(getattr(p, k), rel=1e-6, abs=1e-9)


def test_boundary_anchors(p):
    assert capacity(80, 80 * DEG, p) == pytest.approx(100, abs=50)
    assert capacity(240, 20 * DEG, p) == pytest.approx(100, abs=50)
    assert capacity(400, 0, p) <= capacity(40, 0, p) <= 2310


def test_capacity_zero_outside_fov(p):
    assert capacity(50, 86 * DEG, p) == 0.0
    assert capacity(50, -86 * DEG, p) == 0.0


def test_capacity_non_positive_distance(p):
    with pytest.raises(NonPositiveDistance):
        capacity(0.0, 0.0, p)


@given(st.floats(1.0, 1000.0), st.floats(-math.pi, math.pi))
def test_capacity_matches_reference_and_array(d, phi):
    p = default_params()
    c = capacity(d, phi, p)
    assert 0.0 <= c <= p.rate_cap
    assert c == pytest.approx(capacity_ref(d, phi, p), abs=1e-9)
    assert float(capacity_array(d, phi, p)) == pytest.approx(c, abs=1e-9)


def test_serving_radio_examples():
    def u(m, yaw=0.0):
        return UavState("u", Role.RELAY, PolarPos(0, 0), yaw, m)

    assert serving_radio(u(3), 10 * DEG) == 0
    assert serving_radio(u(3), 120 * DEG) == 1
    for yaw in (0.0, 1.0, 4.0):
        for b in (0.0, 2.0, 5.5):
            assert serving_radio(u(1, yaw), b) == 0


@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi), st.integers(1, 8))
def test_misalignment_bounded_by_half_sector(yaw, b, m):
    u = UavState("u", Role.RELAY, PolarPos(0, 0), yaw, m)
    assert misalignment(u, b) <= math.pi / m + 1e-9


def _pair(dist, yaw_u, yaw_v):
    u = UavState("u", Role.RELAY, PolarPos(0, 0), yaw_u)
    v = UavState("v", Role.RELAY, PolarPos(dist, 0), yaw_v)
    return u, v


def test_link_capacity_examples(p):
    u, v = _pair(100, 0.0, math.pi)
    assert link_capacity(u, v, p) == pytest.approx(capacity(100, 0, p))
    u, v = _pair(100, 20 * DEG, math.pi)
    assert link_capacity(u, v, p) == pytest.approx(capacity(100, 20 * DEG, p))
    # two 50 degree offsets add up to 100 degrees, beyond the field of view
    u, v = _pair(80, 50 * DEG, math.pi + 50 * DEG)
    assert link_capacity(u, v, p) == 0.0
    assert link_capacity(u, v, with_combine(p, "max")) == pytest.approx(capacity(80, 50 * DEG, p))


def test_is_connected_examples(p):
    assert is_connected(*_pair(80, 0, math.pi), p)
    assert not is_connected(*_pair(240, 30 * DEG, math.pi + 30 * DEG), p)
    assert not is_connected(*_pair(500, 0, math.pi), p)


def test_max_range_examples(p):
    reach = max_range(p.conn_threshold, 0.0, p)
    # root of a D^2 + d D + f - 100 = 0
    disc = p.d ** 2 - 4 * p.a * (p.f - 100)
    assert reach == pytest.approx((-p.d - math.sqrt(disc)) / (2 * p.a), rel=1e-9)
    assert reach == pytest.approx(connectivity_range(p))
    with pytest.raises(DemandUnsatisfiableAtAnyRange):
        max_range(p.rate_cap + 1, 0.0, p)
    with pytest.raises(DemandUnsatisfiableAtAnyRange):
        max_range(500, 90 * DEG, p)


@given(st.floats(100, 2200), st.floats(0, 60 * math.pi / 180))
def test_max_range_is_the_boundary(t, phi):
    p = default_params()
    try:
        d = max_range(t, phi, p)
    except DemandUnsatisfiableAtAnyRange:
        return
    assert capacity(d, phi, p) == pytest.approx(t, rel=1e-6)
    assert capacity(d * 1.01, phi, p) < t


def test_fit_recovers_known_coefficients():
    truth = LinkModelParams(a=-0.04, b=-900.0, c=0.3, d=3.0, e=-12.0, f=3000.0)
    rng = np.random.default_rng(3)
    samples = []
    for _ in range(40):
        d, phi = rng.uniform(20, 200), rng.uniform(-0.8, 0.8)
        raw = truth.a * d * d + truth.b * phi * phi + truth.c * phi * d + truth.d * d + truth.e * phi + truth.f
        samples.append(AnchorSample(d, phi, raw, rng.uniform(0.5, 2)))
    fitted = fit_params(samples)
    for k in "abcdef":
        assert getattr(fitted, k) == pytest.approx(getattr(truth, k), rel=1e-6)


def test_fit_singular_design():
    with pytest.raises(SingularDesign):
        fit_params([AnchorSample(100, 0.0, 500)] * 10)
    with pytest.raises(SingularDesign):
        fit_params([AnchorSample(100, 0.0, 500)] * 3)


def test_params_validation():
    with pytest.raises(ValueError):
        LinkModelParams(0, 0, 0, 0, 0, 0, conn_threshold=3000)
    with pytest.raises(ValueError):
        LinkModelParams(0, 0, 0, 0, 0, 0, combine="product")
