"""Shared scenarios for the test suite."""

from dataclasses import replace

import pytest

from uavcoverage.scenario import NumericsConfig, Scenario, check_scenario, default_scenario


@pytest.fixture
def dense_urban() -> Scenario:
    """Dense-urban, 5/km², 100 m, default numerics."""
    return default_scenario()


@pytest.fixture
def fast_scenario() -> Scenario:
    """Dense-urban with a 5 km window and looser quadrature, for unit tests."""
    env, dep, _ = default_scenario()
    num = NumericsConfig(r_max=5000.0, quad_rel_tol=1e-6, quad_abs_tol=1e-10, trials=500, seed=7)
    return check_scenario(env, dep, num)


@pytest.fixture
def small_window(fast_scenario) -> Scenario:
    """Simulation-sized scenario: 3 km window, a few hundred trials."""
    env, dep, num = fast_scenario
    return check_scenario(env, dep, replace(num, r_max=3000.0, trials=300))
