"""Shared fixtures: the published scenario and small random instances."""

import numpy as np
import pytest

from semrelay.channel import ChannelParams, LinkParams, LinkRates
from semrelay.config import bundled_config
from semrelay.repro import published_scenario, random_problem
from semrelay.scenario import RoadGeometry
from semrelay.strategy import Problem

# Published channel constants, written out independently of the config loader.
R_I = 1e6 * np.log2(1 + 10**1.527)
R_V = 1e6 * np.log2(1 + 10**1.144)


@pytest.fixture(scope="session")
def geo():
    return RoadGeometry(1500.0, 500.0, 300.0)


@pytest.fixture(scope="session")
def channel():
    return ChannelParams(
        v2i=LinkParams(2.2, 1.0, 1.0, 10**1.527, 1e6),
        v2v=LinkParams(2.0, 1.0, 1.0, 10**1.144, 1e6),
        noise_power=1e-8,
        fading_m=6.0,
        shadowing_ms=6.0,
        mean_gain=10**0.1,
    )


@pytest.fixture(scope="session")
def rates():
    return LinkRates(R_I, R_V)


@pytest.fixture(scope="session")
def published():
    """``(cfg, kin, rates, sr1)`` of the published scenario."""
    return published_scenario()


@pytest.fixture(scope="session")
def published_problem(published):
    cfg, kin, _, sr = published
    return Problem(kin, cfg.channel, sr, cfg.weights, 40.0)


@pytest.fixture(scope="session")
def published_plan():
    from semrelay.experiment import plan

    return plan(bundled_config())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny(rng):
    """Factory for random small problems."""

    def make(n_relays=2, n_units=4, **kw):
        return random_problem(rng, n_relays, n_units, **kw)

    return make
