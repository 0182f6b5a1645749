# -*- coding: utf-8 -*-
"""
Shared test fixtures and the slow-test switch.

------------------------------------------------------------------------------
This file is part of CFDProp - collaborative feedback discriminative
propagation for video super-resolution.
Released under the MIT License.

@created     19.10.2026
@modified    19.10.2026
------------------------------------------------------------------------------
"""
import numpy as np
import pytest

from cfdprop import conf
from cfdprop import network
from cfdprop.flow import FlowSet, gt_translation_flow


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run slow tests: training sanity and full gradient checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running test, enabled with --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"): return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords: item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    """Smallest meaningful model: 4 channels, one block per stage, one round."""
    return network.ModelConfig(channels=4, fe_blocks=1, prop_blocks=1, rec_blocks=1,
                               gcfb_count=1, prop_rounds=1, seed=7)


@pytest.fixture
def tiny_model(tiny_config):
    return network.CfdModel(tiny_config)


@pytest.fixture
def zero_flows():
    """Returns function(count, (h, w)) -> FlowSet of zero flows."""
    def make(count, shape):
        zero = gt_translation_flow(shape, 0, 0)
        return FlowSet([zero] * (count - 1), [zero] * (count - 1))
    return make


@pytest.fixture(autouse=True)
def small_thread_pool(monkeypatch):
    """Caps per-frame thread pools, ignoring the environment."""
    monkeypatch.setattr(conf, "Threads", 2)
    monkeypatch.delenv(conf.ThreadsEnvironmentVariable, raising=False)
