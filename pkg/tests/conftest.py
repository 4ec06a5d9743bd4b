import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from boxlab.boxes import Box

settings.register_profile("repo", deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rationals(lo=0, hi=1, max_den=60):
    """Rationals in [lo, hi] with bounded denominators."""
    return st.integers(1, max_den).flatmap(
        lambda d: st.integers(int(np.ceil(lo * d)), int(np.floor(hi * d))).map(lambda k: Fraction(k, d)))


def open_unit(max_den=60):
    return st.integers(2, max_den).flatmap(lambda d: st.integers(1, d - 1).map(lambda k: Fraction(k, d)))


def random_dist(rng, size, den=9):
    w = [rng.randint(0, den) for _ in range(size)]
    if sum(w) == 0:
        w[rng.randrange(size)] = 1
    s = sum(w)
    return [Fraction(v, s) for v in w]


def random_box(rng, n, alph):
    """Arbitrary (generally signaling) normalized box."""
    X = int(np.prod(alph.x_shape(n)))
    A = int(np.prod(alph.a_shape(n)))
    M = np.empty((X, A), dtype=object)
    for x in range(X):
        M[x, :] = random_dist(rng, A)
    return Box(n, alph, M.reshape(alph.x_shape(n) + alph.a_shape(n)))


@pytest.fixture
def rng():
    return random.Random(1234)
