import numpy as np
import pytest

from irs_multicast.harness import DESK_CONFIG, DESK_MULTIUSER_CONFIG


@pytest.fixture(scope="session")
def desk_cfg():
    return DESK_CONFIG


@pytest.fixture(scope="session")
def multiuser_cfg():
    return DESK_MULTIUSER_CONFIG


def random_complex(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return (rng.standard_normal((rows, cols))
            + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)
