"""Mobility traces: CSV ingestion, validation and a synthetic generator.

Trace CSVs have the header ``t,vehicle_id,pos_m,speed_mps``. ``pos_m`` is
the road coordinate measured from RSU A (0) towards RSU B (the RSU
spacing); speeds are magnitudes. The target drives from A towards B and
relays drive from B towards A, which fixes how a road position maps to the
planner's signed offsets.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import TraceError
from .scenario import RELAY, TARGET, RoadGeometry, VehicleState

HEADER = ("t", "vehicle_id", "pos_m", "speed_mps")


@dataclass(frozen=True)
class VehicleTrack:
    vehicle_id: str
    t: np.ndarray
    pos: np.ndarray
    speed: np.ndarray

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def average_speed(self) -> float:
        """Net distance over elapsed time."""
        return float(abs(self.pos[-1] - self.pos[0]) / self.duration)

    def position(self, t):
        """Road position at times measured from the track's first sample."""
        return np.interp(np.asarray(t, dtype=float) + self.t[0], self.t, self.pos)


@dataclass(frozen=True)
class MobilityTrace:
    tracks: dict
    timestep: float

    @property
    def vehicle_ids(self) -> list:
        return list(self.tracks)

    @property
    def horizon(self) -> float:
        return min(tr.duration for tr in self.tracks.values())

    def average_speeds(self) -> dict:
        return {vid: tr.average_speed for vid, tr in self.tracks.items()}

    def vehicle_states(self, geo: RoadGeometry, target: str) -> list:
        """Planner inputs: initial signed offsets and horizon-average speeds."""
        if target not in self.tracks:
            raise TraceError(f"target {target!r} not in trace")
        out = []
        for vid, tr in self.tracks.items():
            if vid == target:
                out.append(VehicleState(vid, float(tr.pos[0]), tr.average_speed, TARGET))
            else:
                out.append(VehicleState(vid, float(geo.rsu_spacing - tr.pos[0]), tr.average_speed, RELAY))
        return out

    def offset_function(self, vid: str, geo: RoadGeometry, target: str):
        """``t -> signed offset`` in the planner's convention for vehicle ``vid``."""
        tr = self.tracks[vid]
        if vid == target:
            return tr.position
        return lambda t: geo.rsu_spacing - tr.position(t)


def load_trace(path, continuity_tol=1.0, step_rtol=1e-6) -> MobilityTrace:
    """Read and validate a trace CSV.

    Row numbers in errors count the header as row 1. Per vehicle,
    timestamps must increase strictly on a fixed step, and each position
    change must match the trapezoidal speed integral to ``continuity_tol``
    meters.
    """
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != HEADER:
            raise TraceError(f"expected header {','.join(HEADER)}", 1)
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not x.strip() for x in rec):
                continue
            if len(rec) != 4:
                raise TraceError(f"expected 4 fields, got {len(rec)}", lineno)
            try:
                t, vid, pos, speed = float(rec[0]), rec[1].strip(), float(rec[2]), float(rec[3])
            except ValueError as exc:
                raise TraceError(f"malformed row: {exc}", lineno) from exc
            if not vid:
                raise TraceError("empty vehicle_id", lineno)
            if not np.isfinite([t, pos, speed]).all() or speed < 0:
                raise TraceError("non-finite value or negative speed", lineno)
            rows.setdefault(vid, []).append((lineno, t, pos, speed))
    if not rows:
        raise TraceError("trace has no data rows")

    tracks, steps = {}, []
    for vid, recs in rows.items():
        if len(recs) < 2:
            raise TraceError(f"vehicle {vid} has fewer than two samples", recs[0][0])
        lines = [r[0] for r in recs]
        t = np.array([r[1] for r in recs])
        pos = np.array([r[2] for r in recs])
        speed = np.array([r[3] for r in recs])
        dt = np.diff(t)
        bad = np.flatnonzero(dt <= 0)
        if bad.size:
            raise TraceError(f"non-monotone time for vehicle {vid}", lines[bad[0] + 1])
        step = dt[0]
        off = np.flatnonzero(np.abs(dt - step) > step_rtol * step + 1e-9)
        if off.size:
            raise TraceError(f"irregular timestep for vehicle {vid}", lines[off[0] + 1])
        gap = np.abs(np.abs(np.diff(pos)) - 0.5 * (speed[1:] + speed[:-1]) * dt)
        jump = np.flatnonzero(gap > continuity_tol)
        if jump.size:
            raise TraceError(
                f"position jump of {gap[jump[0]]:.3g} m for vehicle {vid} exceeds {continuity_tol} m",
                lines[jump[0] + 1],
            )
        tracks[vid] = VehicleTrack(vid, t, pos, speed)
        steps.append(step)
    if max(steps) - min(steps) > step_rtol * max(steps) + 1e-9:
        raise TraceError("vehicles use different timesteps")
    return MobilityTrace(tracks, float(steps[0]))


def synthetic_trace(vehicles, geo: RoadGeometry, horizon: float, dt: float = 0.5, speed_offsets=None) -> MobilityTrace:
    """Constant-speed trace for ``vehicles``, optionally with per-vehicle speed shifts."""
    n = int(round(horizon / dt))
    t = np.arange(n + 1) * dt
    tracks = {}
    for k, v in enumerate(vehicles):
        u = v.speed + (0.0 if speed_offsets is None else speed_offsets[k])
        offset = v.offset + u * t
        pos = offset if v.role == TARGET else geo.rsu_spacing - offset
        tracks[v.name] = VehicleTrack(v.name, t, pos, np.full_like(t, u))
    return MobilityTrace(tracks, dt)


def write_trace(trace: MobilityTrace, path) -> None:
    """Write rows ordered by time, then by vehicle in insertion order."""
    ids = trace.vehicle_ids
    n = min(len(trace.tracks[v].t) for v in ids)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for k in range(n):
            for vid in ids:
                tr = trace.tracks[vid]
                w.writerow([repr(float(tr.t[k])), vid, repr(float(tr.pos[k])), repr(float(tr.speed[k]))])
