import pytest

from todforge.ingest import synth_fixtures


@pytest.fixture(scope="session")
def bundle():
    return synth_fixtures(25, 1)


@pytest.fixture(scope="session")
def small_bundle():
    return synth_fixtures(4, 3)
