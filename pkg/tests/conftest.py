"""Shared fixtures: models and rate profiles are session-cached because
the tabulation is deterministic and several modules test against them."""
import numpy as np
import pytest

from mckean.potentials import builtin_double_well, builtin_quadratic
from mckean.rates import tabulate_profile


@pytest.fixture(scope="session")
def quadratic_model():
    return builtin_quadratic(dim=1, rho=1.0, lam=0.0)


@pytest.fixture(scope="session")
def quadratic_profile(quadratic_model):
    return tabulate_profile(quadratic_model)


@pytest.fixture(scope="session")
def double_well_model():
    return builtin_double_well(dim=1, a=0.5, lam=0.01)


@pytest.fixture(scope="session")
def double_well_profile(double_well_model):
    return tabulate_profile(double_well_model)


@pytest.fixture(scope="session")
def configs_dir():
    import pathlib
    here = pathlib.Path(__file__).resolve().parent.parent / "configs"
    assert here.is_dir()
    return here
