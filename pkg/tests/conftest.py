"""Shared fixtures and helpers for the milkit test suite."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from milkit.bags import Bag, MILDataset

settings.register_profile(
    "suite",
    derandomize=True,
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

# Filled by tests/test_acceptance.py; printed once at the end of the run so
# the per-criterion lines are visible even though pytest captures stdout.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_bag(rng: np.random.Generator, bag_id: str, label: int | None,
             n: int, d: int, offset: float = 0.0) -> Bag:
    X = rng.normal(size=(n, d)) + offset
    return Bag(id=bag_id, instances=X, label=label)


def make_dataset(seed: int = 0, n_pos: int = 4, n_neg: int = 4,
                 n_inst: int = 5, d: int = 3, shift: float = 2.0) -> MILDataset:
    """Small labeled dataset where positive bags are shifted by `shift`."""
    rng = np.random.default_rng(seed)
    bags = [make_bag(rng, f"p{i}", 1, n_inst, d, offset=shift) for i in range(n_pos)]
    bags += [make_bag(rng, f"n{i}", -1, n_inst, d) for i in range(n_neg)]
    return MILDataset(bags=tuple(bags), dim=d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_ds():
    return make_dataset()
