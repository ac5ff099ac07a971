import numpy as np
import pytest

from cureinv import SurvivalDataset

# Filled by the acceptance tests, printed at the end of the session.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])


def random_dataset(rng, n, n_times=None, p_event=0.6, x_values=None):
    """Small dataset; ``n_times`` distinct times forces ties."""
    if n_times is None:
        time = rng.exponential(1.0, n)
    else:
        time = rng.integers(1, n_times + 1, n).astype(float)
    status = (rng.random(n) < p_event).astype(int)
    if not status.any():
        status[0] = 1
    x = rng.uniform(-1, 1, n) if x_values is None else rng.choice(x_values, n)
    return SurvivalDataset(time, status, x)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_data(rng):
    return random_dataset(rng, 25)
