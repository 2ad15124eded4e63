import numpy as np
import pytest

from dikin.polytope import analytic_center, cube, make_polytope, random_polytope


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def interval():
    return make_polytope([[1.0], [-1.0]], [0.0, -1.0])


@pytest.fixture
def square():
    return cube(2)


@pytest.fixture(params=[(8, 3, 0), (15, 4, 1), (25, 6, 2)],
                ids=lambda p: f"random{p}")
def random_body(request):
    m, n, seed = request.param
    return random_polytope(m, n, seed)


@pytest.fixture
def interior_point():
    """Random interior point on a random ray from the analytic center.

    The ray extent is bracketed by doubling and halving on raw slacks, so
    the oracle shares no code with the chord routines under test.
    """

    def draw(P, rng):
        c = analytic_center(P)
        d = rng.standard_normal(P.n)
        t = 1.0
        while np.all(P.A @ (c + t * d) > P.b):
            t *= 2.0
        while not np.all(P.A @ (c + t * d) > P.b):
            t *= 0.5
        return c + rng.uniform(0.05, 0.95) * t * d

    return draw
