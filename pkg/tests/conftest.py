import logging

import numpy as np
import pytest

from src.dynamics.types import Trajectory
from src.scenarios.builders import build
from src.scenarios.registry import ScenarioRegistry, get_registry


@pytest.fixture(autouse=True)
def _reset_cli_logger():
    """Drop handlers bound to a previous test's (now closed) captured stderr."""
    yield
    logger = logging.getLogger("src")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def registry() -> ScenarioRegistry:
    return get_registry()


@pytest.fixture(scope="session")
def scenario_trajectory(registry):
    """Factory: scenario_trajectory("qubit_ti", tau=1.0, grid_points=513) -> Trajectory."""

    def _make(scenario_id: str, grid_points: int = 2049, **params: float) -> Trajectory:
        return build(registry.make_config(scenario_id, params, grid_points=grid_points), registry).trajectory

    return _make


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    G = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2 * n)
    return G + G.conj().T


def random_density(n: int, rng: np.random.Generator) -> np.ndarray:
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = G @ G.conj().T
    return rho / np.trace(rho)
