import numpy as np
import pytest

from koopman_prune.koopman import LiftedData
from koopman_prune.systems import rng_for

# acceptance results, echoed in the terminal summary (one line per criterion)
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])


def orthonormal(rng, n, k):
    return np.linalg.qr(rng.standard_normal((n, k)))[0]


def random_data(seed, n=200, s=8, noise=0.3) -> LiftedData:
    rng = rng_for(seed)
    a = rng.standard_normal((n, s))
    b = a @ (np.eye(s) + 0.3 * rng.standard_normal((s, s))) + noise * rng.standard_normal((n, s))
    return LiftedData.from_matrices(a, b)


def max_angle(x, y):
    """Largest principal angle between equal-dimensional column spaces of x and y."""
    if x.shape[1] != y.shape[1]:
        return np.pi / 2
    qx = np.linalg.qr(x)[0]
    qy = np.linalg.qr(y)[0]
    # sine form keeps small angles accurate
    s = np.linalg.norm(qx - qy @ (qy.T @ qx), 2)
    return float(np.arcsin(min(s, 1.0)))


@pytest.fixture
def rng():
    return rng_for(12345)
