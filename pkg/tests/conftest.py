import pytest

from network import AffineMap, ArchSpec, constant_network, network_from_layers
from sampling import grid_sample, radial_ball_sample


@pytest.fixture
def fig2_net():
    """N(x) = ReLU(<(-0.92, 0), x> + 0.12) + 0.12"""
    return network_from_layers(
        [
            AffineMap([[-0.92, 0.0]], [0.12]),
            AffineMap([[1.0]], [0.12]),
        ]
    )


@pytest.fixture(scope="session")
def grid2():
    return grid_sample(2, 100)


@pytest.fixture(scope="session")
def small_grid():
    # 60 points
    return grid_sample(2, 10)


@pytest.fixture(scope="session")
def radial5():
    return radial_ball_sample(5, 2000, seed=11)


@pytest.fixture
def n0_net():
    return constant_network(ArchSpec(2, 2, 1), 0.125)
