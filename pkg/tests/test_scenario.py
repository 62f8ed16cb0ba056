import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semrelay.errors import AlreadyInRangeError, InvalidParameterError, OutOfWindowError
from semrelay.scenario import (
    RELAY,
    TARGET,
    RoadGeometry,
    VehicleState,
    dwell_time,
    encounter_time,
    predict_kinematics,
    relative_speed,
    v2i_distance_at,
    v2v_distance_at,
    v2v_window,
)

V0 = VehicleState("v0", 200.0, 10.97, TARGET)
V1 = VehicleState("v1", 382.0, 15.44)
V15 = VehicleState("v15", -39.0, 12.38)


def test_geometry_invariants():
    with pytest.raises(InvalidParameterError):
        RoadGeometry(900, 500, 300)
    with pytest.raises(InvalidParameterError):
        RoadGeometry(1500, 300, 300)
    with pytest.raises(InvalidParameterError):
        RoadGeometry(1500, 500, 0)


@pytest.mark.parametrize(
    "vehicle, expected",
    [
        (VehicleState("e", 500.0, 10.0), 0.0),
        (V0, 300 / 10.97),
        (V15, 539 / 12.38),
    ],
)
def test_dwell_time(geo, vehicle, expected):
    assert dwell_time(vehicle, geo) == pytest.approx(expected, rel=1e-12)


def test_dwell_time_hand_values(geo):
    assert dwell_time(V0, geo) == pytest.approx(27.347, abs=5e-4)
    assert dwell_time(V15, geo) == pytest.approx(43.538, abs=5e-4)


@pytest.mark.parametrize("offset, speed", [(501.0, 10.0), (-501.0, 10.0), (0.0, 0.0), (0.0, -3.0)])
def test_dwell_time_rejects_invalid(geo, offset, speed):
    with pytest.raises(InvalidParameterError):
        dwell_time(VehicleState("x", offset, speed), geo)


def test_encounter_time_examples(geo):
    # (1500 - 200 - 382 - 300) / 26.41
    assert encounter_time(V1, V0, geo) == pytest.approx(618 / 26.41, rel=1e-12)
    assert encounter_time(V1, V0, geo) == pytest.approx(23.40, abs=5e-3)
    # (1500 - 200 + 39 - 300) / 23.35 = 44.497; the printed 44.07 is an arithmetic slip
    assert encounter_time(V15, V0, geo) == pytest.approx(1039 / 23.35, rel=1e-12)


def test_encounter_time_boundary_and_already_in_range():
    # a short road lets a pair start at, or inside, V2V range
    short = RoadGeometry(1100, 500, 300)
    target = VehicleState("t", 400.0, 10.0, TARGET)
    edge = VehicleState("r", 400.0, 10.0)
    assert encounter_time(edge, target, short) == 0.0
    inside = VehicleState("r", 450.0, 10.0)
    with pytest.raises(AlreadyInRangeError):
        encounter_time(inside, target, short)
    assert encounter_time(inside, target, short, clamp=True) == 0.0


def test_v2v_window(geo):
    assert v2v_window(V1, V0, geo) == pytest.approx(600 / 26.41, rel=1e-12)
    assert v2v_window(V1, V0, geo) == pytest.approx(22.72, abs=5e-3)
    assert v2v_window(VehicleState("r", 0, 20.0), VehicleState("t", 0, 10.0, TARGET), geo) == 20.0
    assert v2v_window(V15, V0, geo) == pytest.approx(25.70, abs=5e-3)


def test_v2i_distance(geo):
    assert v2i_distance_at(V15, 39 / 12.38) == pytest.approx(0.0, abs=1e-12)
    assert v2i_distance_at(V0, 0.0) == 200.0
    assert v2i_distance_at(V0, 10.0) == pytest.approx(309.7, rel=1e-12)
    with pytest.raises(OutOfWindowError):
        v2i_distance_at(V0, 30.0, geo)
    with pytest.raises(OutOfWindowError):
        v2i_distance_at(V0, -1.0, geo)


def test_v2v_distance(geo):
    delta = encounter_time(V1, V0, geo)
    win = v2v_window(V1, V0, geo)
    assert v2v_distance_at(V1, V0, delta, geo) == pytest.approx(300.0, rel=1e-12)
    assert v2v_distance_at(V1, V0, delta + win / 2, geo) == pytest.approx(0.0, abs=1e-9)
    assert v2v_distance_at(V1, V0, delta + 5.0, geo) == pytest.approx(300 - 26.41 * 5, rel=1e-12)
    with pytest.raises(OutOfWindowError):
        v2v_distance_at(V1, V0, delta - 0.1, geo)


vehicle = st.builds(
    lambda o, u: VehicleState("x", o, u),
    st.floats(-500, 500, allow_nan=False),
    st.floats(0.5, 40, allow_nan=False),
)


@given(vehicle)
def test_distance_at_dwell_end_is_radius(v):
    geo = RoadGeometry(1500, 500, 300)
    d = dwell_time(v, geo)
    assert v2i_distance_at(v, d, geo) == pytest.approx(500.0, rel=1e-9, abs=1e-9)


@given(st.floats(0, 490), st.floats(5, 30), st.floats(-500, 500), st.floats(5, 30), st.floats(0, 1))
@settings(max_examples=200)
def test_v2v_distance_symmetric_and_piecewise_linear(o0, u0, oi, ui, frac):
    geo = RoadGeometry(1500, 500, 300)
    t = VehicleState("t", o0, u0, TARGET)
    r = VehicleState("r", oi, ui)
    if 1500 - o0 - oi - 300 < 0:
        return
    delta = encounter_time(r, t, geo)
    win = v2v_window(r, t, geo)
    mid = delta + win / 2
    h = frac * win / 2
    a = v2v_distance_at(r, t, mid - h, geo)
    b = v2v_distance_at(r, t, mid + h, geo)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-7)
    assert a == pytest.approx(relative_speed(r, t) * h, rel=1e-9, abs=1e-7)


def published_vehicles():
    offs = [200, 382, 484, 403, 438, 340, 336, 317, 260, 308, 214, 253, 220, 281, 0.12, -39, -50, -10, -112, -202, -254]
    spd = [10.97, 15.44, 10.81, 14.14, 11.28, 13.31, 13.41, 13.10, 14.03, 12.30, 13.30, 11.41, 11.81, 8.89,
           13.63, 12.38, 11.80, 10.72, 12.90, 13.45, 13.53]
    target = VehicleState("v0", offs[0], spd[0], TARGET)
    relays = [VehicleState(f"v{i}", offs[i], spd[i]) for i in range(1, 21)]
    return target, relays


def test_predict_kinematics_matches_hand_formulas(geo):
    target, relays = published_vehicles()
    kin = predict_kinematics(geo, target, relays)
    assert kin.n_relays == 20
    assert np.all(np.diff(kin.encounter[1:]) >= 0)
    for i, v in enumerate(kin.vehicles):
        assert kin.dwell[i] == pytest.approx((500 - v.offset) / v.speed, rel=1e-9)
        if i:
            u = v.speed + target.speed
            assert kin.rel_speed[i] == pytest.approx(u, rel=1e-9)
            assert kin.encounter[i] == pytest.approx((1500 - target.offset - v.offset - 300) / u, rel=1e-9)
            assert kin.window[i] == pytest.approx(600 / u, rel=1e-9)
            assert v.role == RELAY
    assert math.isnan(kin.encounter[0]) and kin.target.role == TARGET
    assert kin.names[1] == "v1"


def test_predict_kinematics_stable_sort(geo):
    target = VehicleState("t", 0.0, 10.0, TARGET)
    relays = [VehicleState("b", 100.0, 10.0), VehicleState("a", 100.0, 10.0), VehicleState("c", -100.0, 10.0),
              VehicleState("d", 300.0, 10.0)]
    kin = predict_kinematics(geo, target, relays)
    assert kin.names == ["t", "d", "b", "a", "c"]
    assert kin.excluded == ()


def test_predict_kinematics_excludes_relays_already_in_range():
    short = RoadGeometry(1100, 500, 300)
    target = VehicleState("t", 400.0, 10.0, TARGET)
    with pytest.warns(UserWarning, match="excluding"):
        kin = predict_kinematics(short, target, [VehicleState("near", 450.0, 10.0), VehicleState("far", 0.0, 10.0)])
    assert kin.names == ["t", "far"]
    assert kin.excluded == ("near",)


def test_zero_relays(geo):
    kin = predict_kinematics(geo, V0, [])
    assert kin.n_relays == 0 and kin.n_vehicles == 1
