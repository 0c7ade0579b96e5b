import pytest
from hypothesis import HealthCheck, settings

from apcsim.scenario import load
from apcsim.simulation import run

settings.register_profile("apc", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("apc")


@pytest.fixture(scope="session")
def builtin_runs():
    """Full t in [0, 250] runs of the three built-in scenarios."""
    return {name: run(load(name)) for name in ("scenario1", "scenario2", "scenario3")}
