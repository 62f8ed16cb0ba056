"""Road geometry, vehicle states and the predictable kinematic quantities.

Coordinates are one-dimensional along the road. Every vehicle carries a
signed offset from the RSU it is currently attached to, measured along its
own direction of travel: the target drives away from RSU A towards the
outage area, relays drive away from RSU B towards it. A negative offset
means the vehicle has not yet passed its RSU. Units are meters, meters per
second and seconds; the request instant is the time origin.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AlreadyInRangeError, InvalidParameterError, OutOfWindowError

TARGET = "target"
RELAY = "relay"

_TIME_TOL = 1e-9


@dataclass(frozen=True)
class RoadGeometry:
    rsu_spacing: float
    rsu_radius: float
    vehicle_radius: float

    def __post_init__(self):
        if not self.rsu_radius > self.vehicle_radius > 0:
            raise InvalidParameterError(
                f"need rsu_radius > vehicle_radius > 0, got {self.rsu_radius}, {self.vehicle_radius}"
            )
        if not self.rsu_spacing > 2 * self.rsu_radius:
            raise InvalidParameterError(
                f"rsu_spacing {self.rsu_spacing} leaves no outage area for radius {self.rsu_radius}"
            )


@dataclass(frozen=True)
class VehicleState:
    name: str
    offset: float
    speed: float
    role: str = RELAY

    def __post_init__(self):
        if self.role not in (TARGET, RELAY):
            raise InvalidParameterError(f"unknown role {self.role!r}")


def _check_vehicle(vehicle: VehicleState, geo: RoadGeometry):
    if not vehicle.speed > 0:
        raise InvalidParameterError(f"{vehicle.name}: average speed must be positive, got {vehicle.speed}")
    if abs(vehicle.offset) > geo.rsu_radius:
        raise InvalidParameterError(
            f"{vehicle.name}: |offset| = {abs(vehicle.offset)} exceeds RSU radius {geo.rsu_radius}"
        )


def dwell_time(vehicle: VehicleState, geo: RoadGeometry) -> float:
    """Residual time the vehicle stays inside its RSU's coverage."""
    _check_vehicle(vehicle, geo)
    return (geo.rsu_radius - vehicle.offset) / vehicle.speed


def relative_speed(relay: VehicleState, target: VehicleState) -> float:
    return relay.speed + target.speed


def encounter_time(relay: VehicleState, target: VehicleState, geo: RoadGeometry, clamp=False) -> float:
    """Instant at which ``relay`` enters the target's communication radius.

    Raises :class:`AlreadyInRangeError` when the pair is already within range
    at the epoch, unless ``clamp`` is set, in which case 0 is returned.
    """
    _check_vehicle(relay, geo)
    _check_vehicle(target, geo)
    delta = (geo.rsu_spacing - target.offset - relay.offset - geo.vehicle_radius) / relative_speed(relay, target)
    if delta < 0:
        if clamp:
            return 0.0
        raise AlreadyInRangeError(f"{relay.name} is already within V2V range of {target.name} (delta={delta:.4g} s)")
    return delta


def v2v_window(relay: VehicleState, target: VehicleState, geo: RoadGeometry) -> float:
    """Time the relay spends inside the target's communication radius."""
    u = relative_speed(relay, target)
    if not u > 0:
        raise InvalidParameterError("relative speed must be positive")
    return 2 * geo.vehicle_radius / u


def v2i_distance_at(vehicle: VehicleState, t, geo: RoadGeometry | None = None):
    """Distance between the vehicle and its RSU at time ``t``.

    With ``geo`` given, ``t`` is checked against ``[0, dwell]``.
    """
    t = np.asarray(t, dtype=float)
    if geo is not None:
        d_end = dwell_time(vehicle, geo)
        if np.any(t < -_TIME_TOL) or np.any(t > d_end + _TIME_TOL):
            raise OutOfWindowError(f"{vehicle.name}: t outside V2I window [0, {d_end:.6g}]")
    d = np.abs(vehicle.offset + vehicle.speed * t)
    return float(d) if d.ndim == 0 else d


def v2v_distance_at(relay: VehicleState, target: VehicleState, t, geo: RoadGeometry):
    """Distance between relay and target while the relay is within range."""
    t = np.asarray(t, dtype=float)
    delta = encounter_time(relay, target, geo)
    window = v2v_window(relay, target, geo)
    if np.any(t < delta - _TIME_TOL) or np.any(t > delta + window + _TIME_TOL):
        raise OutOfWindowError(f"{relay.name}: t outside V2V window [{delta:.6g}, {delta + window:.6g}]")
    d = np.abs(geo.vehicle_radius - relative_speed(relay, target) * (t - delta))
    return float(d) if d.ndim == 0 else d


@dataclass(frozen=True)
class Kinematics:
    """Predicted link parameters for the target and its relay candidates.

    All arrays have length ``n_relays + 1`` and are indexed by vehicle
    position: 0 is the target, 1.. are relays in encounter order. The
    relay-only arrays hold NaN at index 0.
    """

    geometry: RoadGeometry
    vehicles: tuple
    offsets: np.ndarray
    speeds: np.ndarray
    dwell: np.ndarray
    encounter: np.ndarray
    window: np.ndarray
    rel_speed: np.ndarray
    excluded: tuple = field(default=())

    @property
    def n_relays(self) -> int:
        return len(self.vehicles) - 1

    @property
    def n_vehicles(self) -> int:
        return len(self.vehicles)

    @property
    def names(self) -> list:
        return [v.name for v in self.vehicles]

    @property
    def window_end(self) -> np.ndarray:
        return self.encounter + self.window

    @property
    def target(self) -> VehicleState:
        return self.vehicles[0]


def predict_kinematics(geo: RoadGeometry, target: VehicleState, relays) -> Kinematics:
    """Compute dwell, encounter and V2V-window predictions and order relays.

    Relays are stably sorted by encounter time. Relays already inside the
    target's radius at the epoch are dropped with a warning.
    """
    target = VehicleState(target.name, target.offset, target.speed, TARGET)
    d0 = dwell_time(target, geo)
    kept, excluded = [], []
    for r in relays:
        try:
            delta = encounter_time(r, target, geo)
        except AlreadyInRangeError as exc:
            warnings.warn(f"excluding relay candidate: {exc}", stacklevel=2)
            excluded.append(r.name)
            continue
        kept.append((delta, r))
    kept.sort(key=lambda pair: pair[0])
    ordered = [target] + [VehicleState(r.name, r.offset, r.speed, RELAY) for _, r in kept]

    n = len(ordered)
    encounter = np.full(n, math.nan)
    window = np.full(n, math.nan)
    rel = np.full(n, math.nan)
    dwell = np.empty(n)
    dwell[0] = d0
    for k, (delta, r) in enumerate(kept, start=1):
        encounter[k] = delta
        window[k] = v2v_window(r, target, geo)
        rel[k] = relative_speed(r, target)
        dwell[k] = dwell_time(r, geo)
    return Kinematics(
        geometry=geo,
        vehicles=tuple(ordered),
        offsets=np.array([v.offset for v in ordered], dtype=float),
        speeds=np.array([v.speed for v in ordered], dtype=float),
        dwell=dwell,
        encounter=encounter,
        window=window,
        rel_speed=rel,
        excluded=tuple(excluded),
    )
