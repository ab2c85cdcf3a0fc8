import pytest
from hypothesis import HealthCheck, settings

from hermcount.automorphs import fuchsian_for_form
from hermcount.forms import HermitianForm
from hermcount.ring import Field

settings.register_profile("repo", deadline=None, max_examples=60, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def QI():
    return Field(-4)


@pytest.fixture(scope="session")
def f2(QI):
    return HermitianForm.f_delta(QI, 2)


@pytest.fixture(scope="session")
def f2_group(f2):
    """(AutomorphSet, FuchsianData) for |u|^2 - 2|v|^2 over Q(i)."""
    return fuchsian_for_form(f2, 20)
