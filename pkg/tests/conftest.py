import pytest

from ambitfield.ambit import build_boundary
from ambitfield.levy import NIG, Gamma, Gaussian, Poisson, StableSkewed

# Default scaling used throughout: tau2 = 0.2, Gaussian(0, 1), t_scal = 0.01, T_scal = 1, T = 1.2.
TAU2 = 0.2
T_SCAL_SMALL = 0.01
T_SCAL_LARGE = 1.0
T_DECOR = 1.2

ALL_BASES = [
    Gaussian(0.0, 1.0),
    Gaussian(0.3, 1.5),
    Poisson(2.0, 0.5),
    Gamma(3.0, 12.0),
    StableSkewed(1.5, 0.8),
    StableSkewed(0.6, 1.2),
    NIG(3.0, 0.5, 2.0, 0.1),
]


def basis_id(b):
    return f"{b.kind}-" + "-".join(f"{v:g}" for v in b.__dict__.values())


@pytest.fixture(scope="session")
def gaussian():
    return Gaussian(0.0, 1.0)


@pytest.fixture(scope="session")
def boundary(gaussian):
    return build_boundary(TAU2, gaussian, T_SCAL_SMALL, T_SCAL_LARGE, T_DECOR)
