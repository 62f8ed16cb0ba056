"""Time-stepped execution of a fixed plan against actual vehicle motion.

The plan's per-link manifests and the order of V2V links are kept; no
re-planning happens. On each step a link transmits at its class rate when
its geometric condition holds:

* V2I: the vehicle is inside its RSU's coverage.
* V2V: the relay is within range of the target, the target's own V2I link
  has ended, the relay's pre-store has ended, and no relay earlier in the
  planned order is using the channel on that step.

Power is evaluated at the start of each step; the step that completes a
link is charged only for the fraction it uses. Units go out in descending
importance, and a unit counts as delivered only if all its bits reach the
target before the deadline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import truncnorm

from .channel import V2I, V2V, avg_power
from .errors import TraceError
from .semantics import semantic_energy_efficiency
from .strategy import Assignment, Problem

_BIT_RTOL = 1e-9


@dataclass(frozen=True)
class LinkRecord:
    vehicle: str
    link: str
    start: float
    end: float
    bits: float
    energy: float


@dataclass(frozen=True)
class ExecutionReport:
    delivered: tuple
    undelivered: tuple
    accuracy: float
    planned_accuracy: float
    p_v2i: float
    p_v2v: float
    completion_time: float
    links: tuple
    actual_speeds: tuple

    @property
    def total_energy(self) -> float:
        return self.p_v2i + self.p_v2v

    @property
    def ee_s(self) -> float:
        if self.total_energy <= 0:
            return math.nan
        return semantic_energy_efficiency(self.accuracy, self.total_energy)


@dataclass(frozen=True)
class Motion:
    """Signed offset of every vehicle (planner order) as a function of time."""

    offsets: tuple
    speeds: tuple

    def offset(self, i: int, t):
        return self.offsets[i](t)


def _linear(offset, speed):
    return lambda t: offset + speed * np.asarray(t, dtype=float)


def predicted_motion(kin) -> Motion:
    return Motion(tuple(_linear(o, u) for o, u in zip(kin.offsets, kin.speeds)), tuple(float(u) for u in kin.speeds))


def perturb_speeds(kin, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Predicted speeds plus truncated Gaussian errors, floored at 1 m/s."""
    if sigma <= 0:
        return kin.speeds.copy()
    err = truncnorm.rvs(-3.0, 3.0, size=kin.n_vehicles, random_state=rng) * sigma
    return np.maximum(kin.speeds + err, 1.0)


def perturbed_motion(kin, sigma: float, seed) -> Motion:
    speeds = perturb_speeds(kin, sigma, np.random.default_rng(seed))
    return Motion(tuple(_linear(o, u) for o, u in zip(kin.offsets, speeds)), tuple(float(u) for u in speeds))


def trace_motion(kin, trace, target: str, horizon: float) -> Motion:
    if trace.horizon + 1e-9 < horizon:
        raise TraceError(f"trace covers {trace.horizon:g} s, replay needs {horizon:g} s")
    geo = kin.geometry
    funcs, speeds = [], []
    for name in kin.names:
        if name not in trace.tracks:
            raise TraceError(f"vehicle {name!r} missing from trace")
        funcs.append(trace.offset_function(name, geo, target))
        speeds.append(trace.tracks[name].average_speed)
    return Motion(tuple(funcs), tuple(speeds))


def _run_link(eligible, t, width, rate, volume, power):
    """Transmit ``volume`` bits on the eligible steps.

    Returns ``(sent_per_step, used_mask, end_time, energy)``; ``end_time``
    is NaN when nothing was sent.
    """
    cap = rate * width * eligible
    before = np.concatenate(([0.0], np.cumsum(cap)[:-1]))
    sent = np.clip(volume - before, 0.0, cap)
    used = sent > 0
    if not used.any():
        return sent, used, math.nan, 0.0
    energy = float(np.sum(power[used] * sent[used] / rate))
    k = np.flatnonzero(used)[-1]
    end = t[k] + sent[k] / rate
    return sent, used, float(end), energy


def _arrived(bits, boundary) -> bool:
    # cumulative sums over tens of thousands of steps carry roundoff
    return bits >= boundary * (1.0 - _BIT_RTOL)


def _first(t, used) -> float:
    return float(t[used][0]) if used.any() else math.nan


def _manifest(assignment: Assignment, row: int, alpha, beta):
    members = assignment.members(row)
    members.sort(key=lambda j: (-alpha[j], j))
    bounds = np.cumsum([beta[j] for j in members]) if members else np.array([])
    return members, bounds


def replay(problem: Problem, assignment: Assignment, motion: Motion | None = None, step: float = 1e-3) -> ExecutionReport:
    kin = problem.kinematics
    geo = kin.geometry
    rates = problem.rates
    sr = problem.sr
    alpha, beta = sr.alpha, sr.beta
    if motion is None:
        motion = predicted_motion(kin)
    t_max = problem.t_max
    n_steps = int(math.ceil(t_max / step - 1e-9))
    t = np.arange(n_steps) * step
    width = np.minimum(step, t_max - t)

    loads = assignment.loads(beta)
    offs = [np.asarray(motion.offset(i, t), dtype=float) for i in range(kin.n_vehicles)]
    records = []
    delivered_cols = []
    p_v2i = p_v2v = 0.0

    v2i_end = np.zeros(kin.n_vehicles)
    stored = np.zeros(kin.n_vehicles)
    for i in range(kin.n_vehicles):
        if loads[i] <= 0:
            continue
        d = np.abs(offs[i])
        inside = d <= geo.rsu_radius
        # coverage is left once; a vehicle cannot re-enter its RSU
        if not inside.all():
            first_out = np.argmin(inside)
            inside[first_out:] = False
        sent, used, end, energy = _run_link(inside, t, width, rates.v2i, loads[i], avg_power(V2I, d, problem.channel))
        stored[i] = sent.sum()
        v2i_end[i] = end if used.any() else 0.0
        p_v2i += energy
        records.append(LinkRecord(kin.names[i], "V2I", _first(t, used), end, float(stored[i]), energy))
        if i == 0:
            members, bounds = _manifest(assignment, 0, alpha, beta)
            delivered_cols += [j for j, b in zip(members, bounds) if _arrived(stored[0], b)]

    occupied = np.zeros(n_steps, dtype=bool)
    for i in range(1, kin.n_vehicles):
        if loads[i] <= 0 or stored[i] <= 0:
            continue
        d = np.abs(geo.rsu_spacing - offs[i] - offs[0])
        ready = max(v2i_end[0], v2i_end[i])
        eligible = (d <= geo.vehicle_radius) & (t >= ready - 1e-12) & ~occupied
        sent, used, end, energy = _run_link(
            eligible, t, width, rates.v2v, stored[i], avg_power(V2V, d, problem.channel)
        )
        occupied |= used
        p_v2v += energy
        fwd = float(sent.sum())
        records.append(LinkRecord(kin.names[i], "V2V", _first(t, used), end, fwd, energy))
        members, bounds = _manifest(assignment, i, alpha, beta)
        delivered_cols += [j for j, b in zip(members, bounds) if _arrived(fwd, b)]

    delivered_cols.sort()
    got = set(delivered_cols)
    ends = [r.end for r in records if r.bits > 0 and not math.isnan(r.end)]
    return ExecutionReport(
        delivered=tuple(sr.ids[j] for j in delivered_cols),
        undelivered=tuple(sr.ids[j] for j in range(sr.n) if j not in got),
        accuracy=float(sum(alpha[j] for j in delivered_cols)),
        planned_accuracy=sr.total_accuracy,
        p_v2i=p_v2i,
        p_v2v=p_v2v,
        completion_time=max(ends) if ends else 0.0,
        links=tuple(records),
        actual_speeds=tuple(motion.speeds),
    )
