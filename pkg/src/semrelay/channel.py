"""Fisher-Snedecor F composite fading, link rates, average power and link energy.

Transmission is modelled at the average level: each link class runs at a
fixed rate set by its SNR threshold, and the transmit power needed to hit
that threshold is averaged over the small-scale fading. The energy of a
link is the time integral of that average power along the predicted
distance profile; the closed forms below are checked against
:func:`energy_numeric`, an adaptive-quadrature oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import betaln, gammaln

from .errors import (
    DivergentMomentError,
    InvalidParameterError,
    NonconvergentQuadratureError,
    OutOfWindowError,
)

V2I = "I"
V2V = "V"

_TIME_TOL = 1e-9


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class LinkParams:
    """Per-class link constants; ``snr_threshold`` is linear."""

    pathloss_exponent: float
    reference_loss: float
    antenna_gain: float
    snr_threshold: float
    bandwidth: float

    def __post_init__(self):
        for name in ("pathloss_exponent", "reference_loss", "antenna_gain", "snr_threshold", "bandwidth"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def rate(self) -> float:
        return link_rate(self.bandwidth, self.snr_threshold)


@dataclass(frozen=True)
class ChannelParams:
    v2i: LinkParams
    v2v: LinkParams
    noise_power: float
    fading_m: float
    shadowing_ms: float
    mean_gain: float

    def __post_init__(self):
        if not self.noise_power > 0:
            raise InvalidParameterError("noise_power must be positive")
        if not (self.fading_m > 1 and self.shadowing_ms > 1):
            raise InvalidParameterError(
                f"need m > 1 and m_s > 1 for a finite mean inverse gain, got {self.fading_m}, {self.shadowing_ms}"
            )
        if not self.mean_gain > 0:
            raise InvalidParameterError("mean_gain must be positive")

    def link(self, kind) -> LinkParams:
        if kind == V2I:
            return self.v2i
        if kind == V2V:
            return self.v2v
        raise InvalidParameterError(f"unknown link class {kind!r}")

    @property
    def m_constant(self) -> float:
        return m_constant(self.fading_m, self.shadowing_ms, self.mean_gain)

    def power_coefficient(self, kind) -> float:
        """``K`` in ``avg_power = K * d**a``."""
        link = self.link(kind)
        return self.m_constant * link.snr_threshold * self.noise_power / (link.antenna_gain * link.reference_loss)


@dataclass(frozen=True)
class LinkRates:
    """Fixed rates of the two link classes, bits per second."""

    v2i: float
    v2v: float

    def __post_init__(self):
        if not (self.v2i > 0 and self.v2v > 0):
            raise InvalidParameterError("link rates must be positive")

    @classmethod
    def from_channel(cls, params: ChannelParams) -> "LinkRates":
        return cls(params.v2i.rate, params.v2v.rate)


def _check_shapes(m, ms):
    if not m > 0 or not ms > 1:
        raise InvalidParameterError(f"invalid fading shapes m={m}, m_s={ms}")


def fading_pdf(g, m, ms, gbar):
    """Density of the small-scale power gain under F composite fading."""
    _check_shapes(m, ms)
    if not gbar > 0:
        raise InvalidParameterError("gbar must be positive")
    g = np.asarray(g, dtype=float)
    if np.any(g < 0):
        raise InvalidParameterError("gain must be nonnegative")
    with np.errstate(divide="ignore"):
        log_f = (
            m * math.log(m)
            + ms * math.log((ms - 1) * gbar)
            + (m - 1) * np.log(g)
            - betaln(m, ms)
            - (m + ms) * np.log(m * g + (ms - 1) * gbar)
        )
    f = np.exp(log_f)
    return float(f) if f.ndim == 0 else f


def fading_moment(n, m, ms, gbar) -> float:
    """``E[g**n]``, finite only when ``m + n > 0`` and ``m_s - n > 0``."""
    _check_shapes(m, ms)
    if m + n <= 0 or ms - n <= 0:
        raise DivergentMomentError(f"moment {n} diverges for m={m}, m_s={ms}")
    log_val = (
        n * math.log((ms - 1) * gbar / m)
        + gammaln(m + n)
        - gammaln(m)
        + gammaln(ms - n)
        - gammaln(ms)
    )
    return float(math.exp(log_val))


def m_constant(m, ms, gbar) -> float:
    """Mean inverse fading gain, the factor shared by every average-power term.

    Algebraically equal to ``fading_moment(-1, ...)``; the gamma ratios are
    reduced by hand so the common case comes out exact.
    """
    _check_shapes(m, ms)
    if m <= 1:
        raise DivergentMomentError(f"mean inverse gain diverges for m={m}")
    return m * ms / ((m - 1) * (ms - 1) * gbar)


def link_rate(bandwidth, snr_threshold) -> float:
    if not snr_threshold > 0:
        raise InvalidParameterError("SNR threshold must be positive (linear units)")
    return bandwidth * math.log2(1.0 + snr_threshold)


def avg_power(kind, d, params: ChannelParams, max_range=None):
    """Fading-averaged transmit power needed at distance ``d``."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise InvalidParameterError("distance must be nonnegative")
    if max_range is not None and np.any(d > max_range * (1 + 1e-12)):
        raise OutOfWindowError(f"distance beyond link range {max_range}")
    p = params.power_coefficient(kind) * d ** params.link(kind).pathloss_exponent
    return float(p) if p.ndim == 0 else p


def _pow_diff(hi, lo, p):
    """``hi**p - lo**p`` for ``0 <= lo <= hi`` without cancellation."""
    # roundoff near a crossing point can push either end slightly past 0
    hi = np.maximum(np.asarray(hi, dtype=float), 0.0)
    lo = np.clip(np.asarray(lo, dtype=float), 0.0, hi)
    # cancellation only bites when lo is close to hi; elsewhere the plain
    # difference is exact enough and the ratio could overflow
    close = (lo > 0) & (hi - lo < lo)
    # branches not selected by the caller may see negative arguments
    with np.errstate(invalid="ignore"):
        safe_lo = np.where(close, lo, 1.0)
        ratio = np.where(close, (hi - lo) / safe_lo, 0.0)
        stable = safe_lo**p * np.expm1(p * np.log1p(ratio))
        return np.where(close, stable, hi**p - lo**p)


def v2i_energy(offset, speed, t_start, t_end, params: ChannelParams):
    """Vectorised V2I energy over ``[t_start, t_end]`` without window checks.

    Four cases: a vehicle already past its RSU, one approaching it for the
    whole window, one crossing it inside the window, and one that crossed
    before the window opened.
    """
    offset, speed, t_start, t_end = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (offset, speed, t_start, t_end))
    )
    p = params.v2i.pathloss_exponent + 1.0
    scale = params.power_coefficient(V2I) / (speed * p)
    x_start = offset + speed * t_start
    x_end = offset + speed * t_end
    crossing = -offset / speed

    ahead = _pow_diff(x_end, x_start, p)
    approaching = _pow_diff(-x_start, -x_end, p)
    straddling = np.maximum(-x_start, 0.0) ** p + np.maximum(x_end, 0.0) ** p

    value = np.select(
        [offset >= 0, t_end <= crossing, t_start <= crossing],
        [ahead, approaching, straddling],
        default=ahead,
    )
    out = scale * value
    return float(out) if out.ndim == 0 else out


def v2v_energy(rel_speed, encounter, radius, t_start, t_end, params: ChannelParams):
    """Vectorised V2V energy over ``[t_start, t_end]`` without window checks.

    Three cases around the passing point, where the separation reaches 0.
    """
    rel_speed, encounter, t_start, t_end = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (rel_speed, encounter, t_start, t_end))
    )
    p = params.v2v.pathloss_exponent + 1.0
    scale = params.power_coefficient(V2V) / (rel_speed * p)
    gap_start = radius - rel_speed * (t_start - encounter)
    gap_end = radius - rel_speed * (t_end - encounter)
    midpoint = encounter + radius / rel_speed

    closing = _pow_diff(gap_start, gap_end, p)
    straddling = np.maximum(gap_start, 0.0) ** p + np.maximum(-gap_end, 0.0) ** p
    receding = _pow_diff(-gap_end, -gap_start, p)

    value = np.select([t_end <= midpoint, t_start <= midpoint], [closing, straddling], default=receding)
    out = scale * value
    return float(out) if out.ndim == 0 else out


def _check_window(t_start, t_end, lo, hi, what):
    if t_start > t_end + _TIME_TOL:
        raise OutOfWindowError(f"{what}: start {t_start} after end {t_end}")
    if t_start < lo - _TIME_TOL or t_end > hi + _TIME_TOL:
        raise OutOfWindowError(f"{what}: window [{t_start}, {t_end}] outside [{lo:.6g}, {hi:.6g}]")


def energy_v2i_closed(vehicle, t_start, t_end, params: ChannelParams, geo) -> float:
    """Closed-form V2I energy for ``vehicle`` (a :class:`~semrelay.scenario.VehicleState`)."""
    from .scenario import dwell_time

    _check_window(t_start, t_end, 0.0, dwell_time(vehicle, geo), f"{vehicle.name} V2I")
    return v2i_energy(vehicle.offset, vehicle.speed, t_start, t_end, params)


def energy_v2v_closed(relay, target, t_start, t_end, params: ChannelParams, geo) -> float:
    """Closed-form V2V energy between ``relay`` and ``target``."""
    from .scenario import encounter_time, relative_speed, v2v_window

    delta = encounter_time(relay, target, geo)
    _check_window(t_start, t_end, delta, delta + v2v_window(relay, target, geo), f"{relay.name} V2V")
    return v2v_energy(relative_speed(relay, target), delta, geo.vehicle_radius, t_start, t_end, params)


def energy_numeric(kind, distance, t_start, t_end, params: ChannelParams, rtol=1e-12, breakpoints=()) -> float:
    """Adaptive quadrature of the average power along ``distance(t)``.

    ``breakpoints`` should list kinks of the distance profile (RSU
    crossing, passing point) inside the window.
    """
    if t_end < t_start:
        raise OutOfWindowError("t_end before t_start")
    if t_end == t_start:
        return 0.0
    pts = sorted(b for b in breakpoints if t_start < b < t_end)
    result = integrate.quad(
        lambda t: avg_power(kind, distance(t), params),
        t_start,
        t_end,
        points=pts or None,
        epsabs=0.0,
        epsrel=rtol,
        limit=500,
        full_output=1,
    )
    value, abserr = result[0], result[1]
    if len(result) > 3 and abserr > 10 * rtol * abs(value) + 1e-300:
        raise NonconvergentQuadratureError(f"quadrature failed: {result[3]}")
    return value


def sample_fading(rng: np.random.Generator, m, ms, gbar, size=None):
    """Draw small-scale power gains as a scaled ratio of gamma variates."""
    _check_shapes(m, ms)
    g1 = rng.gamma(shape=m, scale=1.0, size=size)
    g2 = rng.gamma(shape=ms, scale=1.0, size=size)
    return gbar * (ms - 1) / m * g1 / g2
