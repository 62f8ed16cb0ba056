"""Assignments of semantic units to vehicles, the link schedule they induce,
feasibility and the penalised objective.

An assignment is stored as a row index per unit: ``rows[j] = i`` means
unit ``j`` travels on vehicle ``i`` (0 is the direct link). The 0/1
vehicle-by-unit matrix is available through :meth:`Assignment.matrix`.

Everything that scores assignments goes through :func:`evaluate_batch`,
which works on a stack of assignments at once so the optimizers and the
exhaustive oracle share one code path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .channel import V2I, V2V, ChannelParams, LinkRates, avg_power, v2i_energy, v2v_energy
from .errors import InvalidParameterError, ShapeMismatchError
from .scenario import Kinematics
from .semantics import SemanticRepresentation, reliability_from_mask

RELAY_CAPACITY = "relay_capacity"
DIRECT_CAPACITY = "direct_capacity"
DEADLINE = "deadline"

_ATOL_BITS = 1e-6
_ATOL_TIME = 1e-9


class Assignment:
    """Immutable unit-to-vehicle map."""

    __slots__ = ("_rows", "n_vehicles")

    def __init__(self, rows, n_vehicles: int):
        rows = np.array(rows, dtype=np.int64)
        if rows.ndim != 1:
            raise ShapeMismatchError("rows must be one-dimensional")
        if rows.size and (rows.min() < 0 or rows.max() >= n_vehicles):
            raise ShapeMismatchError(f"row index outside 0..{n_vehicles - 1}")
        rows.setflags(write=False)
        self._rows = rows
        self.n_vehicles = int(n_vehicles)

    @classmethod
    def all_direct(cls, n_units: int, n_vehicles: int) -> "Assignment":
        return cls(np.zeros(n_units, dtype=np.int64), n_vehicles)

    @classmethod
    def from_matrix(cls, phi) -> "Assignment":
        phi = np.asarray(phi)
        if phi.ndim != 2:
            raise ShapeMismatchError("assignment matrix must be 2-D")
        if not np.all(np.isin(phi, (0, 1))) or not np.all(phi.sum(axis=0) == 1):
            raise ShapeMismatchError("each column must hold exactly one 1")
        return cls(np.argmax(phi, axis=0), phi.shape[0])

    @property
    def rows(self) -> np.ndarray:
        return self._rows

    @property
    def n_units(self) -> int:
        return self._rows.size

    def matrix(self) -> np.ndarray:
        phi = np.zeros((self.n_vehicles, self.n_units), dtype=np.int8)
        phi[self._rows, np.arange(self.n_units)] = 1
        return phi

    def moved(self, unit: int, row: int) -> "Assignment":
        rows = self._rows.copy()
        rows[unit] = row
        return Assignment(rows, self.n_vehicles)

    def loads(self, beta) -> np.ndarray:
        return np.bincount(self._rows, weights=np.asarray(beta, dtype=float), minlength=self.n_vehicles)

    def members(self, row: int) -> list:
        return [int(j) for j in np.flatnonzero(self._rows == row)]

    def __eq__(self, other):
        return (
            isinstance(other, Assignment)
            and self.n_vehicles == other.n_vehicles
            and np.array_equal(self._rows, other._rows)
        )

    def __hash__(self):
        return hash((self.n_vehicles, self._rows.tobytes()))

    def __repr__(self):
        return f"Assignment(rows={self._rows.tolist()}, n_vehicles={self.n_vehicles})"


def as_assignment(phi, n_vehicles=None) -> Assignment:
    if isinstance(phi, Assignment):
        return phi
    arr = np.asarray(phi)
    if arr.ndim == 2:
        return Assignment.from_matrix(arr)
    if n_vehicles is None:
        raise ShapeMismatchError("n_vehicles is required for a row-index vector")
    return Assignment(arr, n_vehicles)


@dataclass(frozen=True)
class ObjectiveWeights:
    kappa_energy: float = 0.5
    kappa_reliability: float = 0.1
    theta_direct: float = 1.5
    theta_relay: float = 0.5
    penalty: float | None = None

    def __post_init__(self):
        if self.kappa_energy < 0 or self.kappa_reliability < 0:
            raise InvalidParameterError("weights must be nonnegative")
        if not self.theta_direct > self.theta_relay > 0:
            raise InvalidParameterError("need theta_direct > theta_relay > 0")
        if self.penalty is not None and not self.penalty > 0:
            raise InvalidParameterError("penalty must be positive")


@dataclass(frozen=True)
class LinkSchedule:
    """Link timing and capacities. Relay-only arrays hold NaN at index 0."""

    loads: np.ndarray
    v2i_end: np.ndarray
    v2v_start: np.ndarray
    v2v_end: np.ndarray
    cap_v2i: np.ndarray
    cap_v2v: np.ndarray


@dataclass(frozen=True)
class Violation:
    constraint: str
    vehicle: int
    value: float
    limit: float

    @property
    def margin(self) -> float:
        """How far ``value`` exceeds ``limit``."""
        return self.value - self.limit


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple = ()
    checks: tuple = field(default=(), compare=False)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def schedule_batch(loads, kin: Kinematics, rates: LinkRates) -> dict:
    """Link schedule for a stack of per-vehicle loads of shape ``(B, V+1)``.

    The V2V chain visits relays in encounter order. An idle relay opens a
    zero-length link and does not release the channel early: a running
    maximum of link ends is carried down the chain, so an idle relay whose
    own window closed before the previous link finished cannot let its
    successor start ahead of that link.
    """
    loads = np.atleast_2d(np.asarray(loads, dtype=float))
    n_batch, n = loads.shape
    if n != kin.n_vehicles:
        raise ShapeMismatchError(f"loads have {n} vehicles, kinematics {kin.n_vehicles}")
    v2i_end = loads / rates.v2i
    start = np.full((n_batch, n), np.nan)
    end = np.full((n_batch, n), np.nan)
    busy = v2i_end[:, 0].copy()
    delta, wend = kin.encounter, kin.window_end
    for i in range(1, n):
        s = np.minimum(np.maximum(delta[i], busy), wend[i])
        e = s + loads[:, i] / rates.v2v
        start[:, i], end[:, i] = s, e
        busy = np.maximum(busy, e)
    cap_i = np.full((n_batch, n), np.nan)
    cap_v = np.full((n_batch, n), np.nan)
    cap_i[:, 0] = rates.v2i * kin.dwell[0]
    cap_i[:, 1:] = rates.v2i * np.minimum(kin.dwell[1:], start[:, 1:])
    cap_v[:, 1:] = rates.v2v * (wend[1:] - start[:, 1:])
    return dict(loads=loads, v2i_end=v2i_end, v2v_start=start, v2v_end=end, cap_v2i=cap_i, cap_v2v=cap_v)


def _feasible_batch(sched: dict, t_max: float) -> np.ndarray:
    loads = sched["loads"]
    tol = _ATOL_BITS + 1e-12 * loads
    direct_ok = loads[:, 0] <= sched["cap_v2i"][:, 0] + tol[:, 0]
    relay_loads = loads[:, 1:]
    active = relay_loads > 0
    cap = np.minimum(sched["cap_v2i"][:, 1:], sched["cap_v2v"][:, 1:])
    relay_ok = np.all(~active | (relay_loads <= cap + tol[:, 1:]), axis=1)
    last_end = np.max(np.where(active, sched["v2v_end"][:, 1:], -np.inf), axis=1, initial=-np.inf)
    deadline_ok = last_end <= t_max + _ATOL_TIME
    return direct_ok & relay_ok & deadline_ok


def _energy_batch(sched: dict, kin: Kinematics, params: ChannelParams):
    """V2I and V2V energy for each schedule in the batch.

    Link windows are clipped to the interval where the link exists (the
    dwell for V2I, the encounter window for V2V), so infeasible states
    still receive a finite energy.
    """
    v2i_stop = np.minimum(sched["v2i_end"], kin.dwell)
    e_i = v2i_energy(kin.offsets, kin.speeds, 0.0, v2i_stop, params)
    e_i = np.where(sched["loads"] > 0, e_i, 0.0)
    p_v2i = np.atleast_1d(np.sum(np.atleast_2d(e_i), axis=1))
    if kin.n_relays == 0:
        return p_v2i, np.zeros_like(p_v2i)
    s = sched["v2v_start"][:, 1:]
    e = np.minimum(sched["v2v_end"][:, 1:], kin.window_end[1:])
    e_v = v2v_energy(kin.rel_speed[1:], kin.encounter[1:], kin.geometry.vehicle_radius, s, e, params)
    e_v = np.where(sched["loads"][:, 1:] > 0, e_v, 0.0)
    return p_v2i, np.atleast_1d(np.sum(np.atleast_2d(e_v), axis=1))


@dataclass(frozen=True)
class Problem:
    """One planning instance: who can carry what, and how it is scored."""

    kinematics: Kinematics
    channel: ChannelParams
    sr: SemanticRepresentation
    weights: ObjectiveWeights
    t_max: float

    def __post_init__(self):
        if not self.t_max > 0:
            raise InvalidParameterError("t_max must be positive")

    @cached_property
    def rates(self) -> LinkRates:
        return LinkRates.from_channel(self.channel)

    @property
    def n_vehicles(self) -> int:
        return self.kinematics.n_vehicles

    @property
    def n_units(self) -> int:
        return self.sr.n

    @property
    def n_states(self) -> int:
        return self.n_vehicles**self.n_units

    @cached_property
    def penalty(self) -> float:
        if self.weights.penalty is not None:
            return self.weights.penalty
        return default_penalty(self.sr, self.channel, self.kinematics, self.weights)

    def assignment(self, rows) -> Assignment:
        return Assignment(rows, self.n_vehicles)

    def evaluate(self, phi) -> dict:
        """Scalar scores of one assignment."""
        a = as_assignment(phi, self.n_vehicles)
        out = evaluate_batch(self, a.rows[None, :])
        return {k: (float(v[0]) if v.dtype != bool else bool(v[0])) for k, v in out.items()}

    def u_hat(self, phi) -> float:
        return self.evaluate(phi)["u_hat"]


def loads_batch(rows, beta, n_vehicles: int) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.int64))
    n_batch = rows.shape[0]
    flat = rows + n_vehicles * np.arange(n_batch)[:, None]
    weights = np.broadcast_to(np.asarray(beta, dtype=float), rows.shape)
    return np.bincount(flat.ravel(), weights=weights.ravel(), minlength=n_batch * n_vehicles).reshape(
        n_batch, n_vehicles
    )


def evaluate_batch(problem: Problem, rows) -> dict:
    """Scores for a stack of row-index vectors of shape ``(B, N)``.

    Returns arrays keyed by ``p_v2i``, ``p_v2v``, ``theta``, ``feasible``,
    ``u`` and ``u_hat``.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=np.int64))
    if rows.shape[1] != problem.n_units:
        raise ShapeMismatchError(f"rows have {rows.shape[1]} units, problem has {problem.n_units}")
    kin, w = problem.kinematics, problem.weights
    loads = loads_batch(rows, problem.sr.beta, problem.n_vehicles)
    sched = schedule_batch(loads, kin, problem.rates)
    feasible = _feasible_batch(sched, problem.t_max)
    p_v2i, p_v2v = _energy_batch(sched, kin, problem.channel)
    alpha = problem.sr.alpha
    theta = reliability_from_mask(rows == 0, alpha, w.theta_direct, w.theta_relay)
    u = w.kappa_energy * (p_v2i + p_v2v) - w.kappa_reliability * theta
    u_hat = u + np.where(feasible, 0.0, problem.penalty)
    return dict(p_v2i=p_v2i, p_v2v=p_v2v, theta=theta, feasible=feasible, u=u, u_hat=u_hat)


def derive_schedule(phi, kin: Kinematics, rates: LinkRates, sr: SemanticRepresentation) -> LinkSchedule:
    a = as_assignment(phi, kin.n_vehicles)
    if a.n_vehicles != kin.n_vehicles or a.n_units != sr.n:
        raise ShapeMismatchError("assignment does not match kinematics and SR")
    sched = schedule_batch(a.loads(sr.beta)[None, :], kin, rates)
    return LinkSchedule(**{k: v[0] for k, v in sched.items()})


def check_feasibility(phi, schedule: LinkSchedule, kin: Kinematics, t_max: float) -> FeasibilityReport:
    """Evaluate every constraint and report each violation with its margin.

    ``checks`` lists every evaluated constraint as a :class:`Violation`
    record (margin <= 0 when satisfied), so callers can see how close
    each one is to binding.
    """
    loads = schedule.loads
    checks = [Violation(DIRECT_CAPACITY, 0, float(loads[0]), float(schedule.cap_v2i[0]))]
    last_end, last_vehicle = -math.inf, None
    for i in range(1, kin.n_vehicles):
        if loads[i] <= 0:
            continue
        cap = float(min(schedule.cap_v2i[i], schedule.cap_v2v[i]))
        checks.append(Violation(RELAY_CAPACITY, i, float(loads[i]), cap))
        if schedule.v2v_end[i] > last_end:
            last_end, last_vehicle = float(schedule.v2v_end[i]), i
    if last_vehicle is not None:
        checks.append(Violation(DEADLINE, last_vehicle, last_end, float(t_max)))
    bad = []
    for c in checks:
        tol = _ATOL_TIME if c.constraint == DEADLINE else _ATOL_BITS + 1e-12 * abs(c.value)
        if c.margin > tol:
            bad.append(c)
    return FeasibilityReport(tuple(bad), tuple(checks))


def total_energy(phi, schedule: LinkSchedule, kin: Kinematics, channel: ChannelParams):
    """``(P_V2I, P_V2V)`` in joules."""
    sched = {k: np.asarray(v)[None, :] for k, v in schedule.__dict__.items()}
    p_i, p_v = _energy_batch(sched, kin, channel)
    return float(p_i[0]), float(p_v[0])


def objective_u(p_v2i, p_v2v, theta, weights: ObjectiveWeights) -> float:
    return weights.kappa_energy * (p_v2i + p_v2v) - weights.kappa_reliability * theta


def penalized_u_hat(u: float, feasible: bool, penalty: float) -> float:
    return u if feasible else u + penalty


def energy_upper_bound(sr: SemanticRepresentation, channel: ChannelParams, kin: Kinematics) -> float:
    """Energy of sending every unit over both hops at maximum range."""
    geo = kin.geometry
    rates = LinkRates.from_channel(channel)
    per_bit = avg_power(V2I, geo.rsu_radius, channel) / rates.v2i + avg_power(V2V, geo.vehicle_radius, channel) / rates.v2v
    return float(sr.total_volume * per_bit)


def default_penalty(sr, channel, kin, weights: ObjectiveWeights) -> float:
    """Penalty an order of magnitude above the widest possible spread of U."""
    spread = weights.kappa_energy * energy_upper_bound(sr, channel, kin)
    spread += weights.kappa_reliability * weights.theta_direct * sr.total_accuracy
    return 10.0 * spread if spread > 0 else 1.0


def strategy_document(phi, kin: Kinematics, sr: SemanticRepresentation, name="", extra=None) -> dict:
    """Vehicle name to unit-id list, listing only vehicles that carry units."""
    a = as_assignment(phi, kin.n_vehicles)
    ids = sr.ids
    plan = {}
    for i, vname in enumerate(kin.names):
        members = a.members(i)
        if members:
            plan[vname] = [ids[j] for j in members]
    doc = {"strategy": name, "assignment": plan}
    if extra:
        doc.update(extra)
    return doc


def assignment_from_document(doc: dict, kin: Kinematics, sr: SemanticRepresentation) -> Assignment:
    rows = np.full(sr.n, -1, dtype=np.int64)
    names = kin.names
    for vname, uids in doc["assignment"].items():
        if vname not in names:
            raise ShapeMismatchError(f"unknown vehicle {vname!r}")
        for uid in uids:
            j = sr.index(uid)
            if rows[j] >= 0:
                raise ShapeMismatchError(f"unit {uid!r} assigned twice")
            rows[j] = names.index(vname)
    if np.any(rows < 0):
        missing = [sr.ids[j] for j in np.flatnonzero(rows < 0)]
        raise ShapeMismatchError(f"units not assigned: {missing}")
    return Assignment(rows, kin.n_vehicles)


def write_strategy(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def read_strategy(path) -> dict:
    return json.loads(Path(path).read_text())
