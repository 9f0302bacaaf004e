import pytest

from sgreplan.harness import build_buffer
from sgreplan.simworld import builtin_suite


@pytest.fixture(scope="session")
def suite():
    return builtin_suite()


@pytest.fixture(scope="session")
def buffer(suite):
    return build_buffer(suite)
