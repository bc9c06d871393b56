import os
import sys
import pytest

# Add the project root directory to Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.model import make_instance


def pytest_configure(config):
    """Register custom marks."""
    config.addinivalue_line(
        "markers",
        "integration: mark test as an integration test"
    )


@pytest.fixture
def tiny_instance():
    """Three variables, one knapsack row, optimum -7 at (1, 0, 1)"""
    return make_instance(
        q=[[-4, 1, -1], [1, -3, 2], [-1, 2, -1]],
        a=[[2, 3, 1]],
        b=[3],
    )


@pytest.fixture
def unconstrained_instance():
    """Single variable with Q=[[-1]] and no constraints"""
    return make_instance(q=[[-1]])


@pytest.fixture
def infeasible_instance():
    """No binary point satisfies x_0 <= -1"""
    return make_instance(q=[[1]], a=[[1]], b=[-1])


@pytest.fixture
def mock_config():
    """Provide a configuration dict with small limits"""
    return {
        "STRATEGY": "mostviol",
        "ORACLE": "exact",
        "MAX_NODES": 5000,
        "MAX_TIME": 60,
    }
