import pytest

from gpsignal.flow import FlowRule, FlowSpec, generate_flow
from gpsignal.network import generate_grid

ASYMMETRIC = {"N": 4, "S": 5, "E": 9, "W": 12}


@pytest.fixture(scope="session")
def grid1():
    return generate_grid(1, 1)


@pytest.fixture(scope="session")
def grid2():
    return generate_grid(2, 2)


@pytest.fixture(scope="session")
def flow2(grid2):
    return generate_flow(grid2, duration=3600, intervals=ASYMMETRIC, seed=3)


@pytest.fixture(scope="session")
def single_vehicle():
    """One car entering from the north boundary, straight through the single junction, spawned at t=0."""
    net = generate_grid(1, 1, road_length=300.0, speed=10.0)
    flow = FlowSpec((FlowRule(("road_1_2_3", "road_1_1_3"), 0.0, 0.0, 1.0),))
    return net, flow
