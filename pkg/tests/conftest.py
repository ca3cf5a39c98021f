import pytest

from builders import CHAIN_SOURCE, FORK_SOURCE, SCENARIOS, build_instance, transfer_platform
from services.scenario import compile_scenario, load_scenario


@pytest.fixture
def chain():
    """Three stages on one core, runtimes 2, 3 and 4."""
    return build_instance(CHAIN_SOURCE, "chain", {"f_0": (2, 64), "f_1": (3, 64), "f_2": (4, 64)})


@pytest.fixture
def fork():
    """Four independent jobs of 5, 4, 3 and 2 clocks on two cores."""
    return build_instance(
        FORK_SOURCE, "fork", {"f_0": (5, 64), "f_1": (4, 64), "f_2": (3, 64), "f_3": (2, 64)}, cores=2
    )


@pytest.fixture
def transfers():
    """The fork jobs with every output crossing a port in 100-clock transfers."""
    return build_instance(
        FORK_SOURCE,
        "fork",
        {"f_0": (5, 6400), "f_1": (4, 6400), "f_2": (3, 6400), "f_3": (2, 6400)},
        platform_data=transfer_platform(2),
    )


@pytest.fixture(scope="session")
def mmimo():
    return compile_scenario(load_scenario(SCENARIOS / "mmimo" / "scenario.yaml"))


@pytest.fixture(scope="session")
def mmimo_low():
    return compile_scenario(load_scenario(SCENARIOS / "mmimo" / "low_doppler.yaml"))


@pytest.fixture(scope="session")
def srs():
    return compile_scenario(load_scenario(SCENARIOS / "srs_chest" / "scenario.yaml"))
