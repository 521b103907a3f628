import numpy as np
import pytest
from hypothesis import settings

from adiabent import _accel
from adiabent.spectral import RankOneActivation

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

BACKENDS = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])


def random_activation(rng, n, spread=10.0, min_gap=1e-3, mu_final=0.0):
    gaps = rng.uniform(min_gap, 1.0, n - 1) if n > 1 else np.zeros(0)
    d = np.concatenate([[0.0], np.cumsum(gaps)])
    if n > 1:
        d = d * (spread / d[-1])
    d = d + rng.uniform(-5.0, 5.0)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return RankOneActivation(d, v / np.linalg.norm(v), mu_final)


def dense_overlap(a, b):
    return abs(np.vdot(a, b))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
