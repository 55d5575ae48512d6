import pytest

from roapgd.presets import make_pendulum_policy, pendulum_spec


@pytest.fixture(scope="session")
def pendulum_policy():
    return make_pendulum_policy()


@pytest.fixture(scope="session")
def pendulum_closed_loop(pendulum_policy):
    """Default pendulum in feedback with the preset tanh policy."""
    return pendulum_spec(policy=pendulum_policy)


@pytest.fixture(scope="session")
def pendulum_bounded():
    """Pendulum instance whose attraction region is genuinely bounded: the
    actuator limit is below the torque needed to hold large angles, so the
    basin boundary sits around radius 0.75 in (angle, velocity) units."""
    return pendulum_spec(params={"saturation": 0.5})

