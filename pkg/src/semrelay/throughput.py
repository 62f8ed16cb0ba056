"""Achievable throughput of the store-carry-forward relay chain.

Relays are visited in encounter order. Each one can forward only once the
target has left RSU A (first relay) or once the earlier relays have
finished their V2V links inside its own window (later relays); it can
forward no more than it managed to pre-store from RSU B before that start.
The union of all V2V link intervals, clipped to the deadline and to the
time after the target's own V2I link, gives the relayed share of the
achievable throughput.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import LinkRates
from .intervals import IntervalSet
from .scenario import Kinematics


@dataclass(frozen=True)
class ThroughputAnalysis:
    """Recursion output. Per-vehicle arrays hold NaN at the target's index."""

    kinematics: Kinematics
    rates: LinkRates
    forward_start: np.ndarray
    prestore_cap: np.ndarray
    chain: tuple

    @property
    def links(self) -> IntervalSet:
        return self.chain[-1] if self.chain else IntervalSet()

    def q_max(self, t_max) -> float:
        return achievable_throughput(self, t_max)


def forward_start(index: int, kin: Kinematics, previous: IntervalSet) -> float:
    """Earliest instant relay ``index`` can start forwarding.

    The first relay waits for the target to leave RSU A. Later relays lose
    the part of their window already occupied by earlier V2V links.
    The result is clamped into the relay's window.
    """
    delta = kin.encounter[index]
    end = kin.window_end[index]
    if index == 1:
        return float(min(max(delta, kin.dwell[0]), end))
    return float(delta + previous.overlap(delta, end))


def prestore_cap(index: int, kin: Kinematics, start: float, rates: LinkRates) -> float:
    """Bits relay ``index`` can pre-store from its RSU before ``start``."""
    return float(rates.v2i * min(kin.dwell[index], max(start, 0.0)))


def cumulative_links(kin: Kinematics, rates: LinkRates, t_max=None) -> ThroughputAnalysis:
    """Run the link-accumulation recursion over every relay.

    With ``t_max`` given, relays first met after the deadline are skipped;
    they could not contribute to any throughput within it.
    """
    n = kin.n_vehicles
    starts = np.full(n, math.nan)
    caps = np.full(n, math.nan)
    chain = []
    links = IntervalSet()
    for i in range(1, n):
        if t_max is not None and kin.encounter[i] > t_max:
            chain.append(links)
            continue
        start = forward_start(i, kin, links)
        cap = prestore_cap(i, kin, start, rates)
        end = min(start + cap / rates.v2v, kin.window_end[i])
        links = links | IntervalSet.single(start, end)
        starts[i], caps[i] = start, cap
        chain.append(links)
    return ThroughputAnalysis(kin, rates, starts, caps, tuple(chain))


def achievable_throughput(analysis: ThroughputAnalysis, t_max) -> float:
    """Bits deliverable within ``t_max``: direct dwell plus relayed V2V time.

    The direct term is capped at ``t_max`` so the total stays monotone in
    the deadline even when the target is still covered at ``t_max``.
    """
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    d0 = analysis.kinematics.dwell[0]
    relayed = analysis.links.clip(0.0, t_max) - IntervalSet.single(0.0, d0)
    return float(analysis.rates.v2i * min(d0, t_max) + analysis.rates.v2v * relayed.measure)
