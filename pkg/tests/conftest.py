import pytest

from guidenav.scenario import resolve_map_path


@pytest.fixture(scope="session")
def office_map():
    return resolve_map_path("builtin:office")


@pytest.fixture(scope="session")
def house_map():
    return resolve_map_path("builtin:house")
