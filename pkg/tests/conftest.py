import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ALPHAS = (1.0, 1.25, 1.5, 1.75, 1.99)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_configuration(rng, n, spread=2.0, min_sep=0.2):
    """Rejection-sampled positions with a separation floor and signed intensities."""
    from vortexlab import Configuration

    while True:
        pos = rng.uniform(-spread, spread, size=(n, 2))
        d = np.linalg.norm(pos[:, None] - pos[None], axis=-1)
        np.fill_diagonal(d, np.inf)
        if d.min() > min_sep:
            break
    a = rng.uniform(0.3, 2.0, n) * rng.choice([-1.0, 1.0], n)
    return Configuration(pos, a)
