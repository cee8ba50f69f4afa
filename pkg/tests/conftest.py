"""Shared fixtures and hypothesis settings."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lcsb.core import SearchSpaceSpec
from lcsb.synthspace import NB201_SPACE, SyntheticOracle, generate_dataset

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def chain_space(n_edges: int, n_ops: int, e_max: int = 10) -> SearchSpaceSpec:
    """A path-shaped cell with `n_edges` edges."""
    edges = tuple((i, i + 1) for i in range(n_edges))
    return SearchSpaceSpec(n_edges + 1, edges, tuple(f"op{i}" for i in range(n_ops)), e_max, "chain")


@pytest.fixture(scope="session")
def oracle():
    return SyntheticOracle.from_seed(0)


@pytest.fixture(scope="session")
def small_dataset(oracle):
    """300 architectures x 3 seeds from the default oracle."""
    return generate_dataset(oracle, 300, 3, rng_seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def nb201():
    return NB201_SPACE


# -- acceptance summary -------------------------------------------------------

_CRITERIA = []


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" in props and (report.when == "call" or report.outcome != "passed"):
        _CRITERIA.append((props["criterion"], report.outcome, props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n, outcome, detail in sorted(_CRITERIA):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
