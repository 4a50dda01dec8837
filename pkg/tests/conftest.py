import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def shell_forest():
    from ballforest.forest import build_shell_forest
    return build_shell_forest(1, 0.5, 0.8)


@pytest.fixture(scope="session")
def fixture_run():
    """The five-ball composer run (J = 3), shared by composer tests."""
    from ballforest.composer import ComposeConfig, compose
    from ballforest.fixtures import five_ball_forest, fixture_surface
    with np.errstate(over="ignore", invalid="ignore"):
        return compose(fixture_surface(), five_ball_forest(), ComposeConfig())
