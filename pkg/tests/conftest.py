import numpy as np
import pytest

from qmcf import quasidistance
from qmcf.potential import DEFAULT_COEFFS


@pytest.fixture(scope="session")
def table():
    """Default-resolution distance table, shared by the whole session."""
    return quasidistance.build_table(DEFAULT_COEFFS)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_traceless(rng, n, radius):
    """Coefficient vectors uniformly scattered in the ball of given radius."""
    v = rng.standard_normal((n, 5))
    scale = radius * rng.random(n) ** 0.2 / np.linalg.norm(v, axis=1)
    return v * scale[:, None]


def random_rotation(rng):
    """Haar-ish random rotation matrix from a QR factorisation."""
    a = rng.standard_normal((3, 3))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
