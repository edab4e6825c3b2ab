import numpy as np
import pytest

from boostcast.series import bars_from_arrays, shift_prev
from boostcast.synthetic import SyntheticSpec, generate_bars


def random_bars(n, seed=0, start=100.0):
    rng = np.random.default_rng(seed)
    close = start * np.exp(np.cumsum(rng.normal(0.0005, 0.015, n)))
    prior = np.concatenate([[start], close[:-1]])
    open_ = prior * np.exp(rng.normal(0, 0.004, n))
    high = np.maximum(open_, close) * (1 + rng.uniform(0, 0.01, n))
    low = np.minimum(open_, close) * (1 - rng.uniform(0, 0.01, n))
    volume = np.round(rng.lognormal(12, 0.4, n))
    dates = np.busday_offset(np.datetime64("2015-01-02"), np.arange(n), roll="forward")
    return bars_from_arrays(dates, open_, high, low, close, volume)


@pytest.fixture(scope="session")
def bars_400():
    return random_bars(400, seed=3)


@pytest.fixture(scope="session")
def prev_400(bars_400):
    return shift_prev(bars_400)


@pytest.fixture(scope="session")
def synthetic_prev_600():
    return shift_prev(generate_bars(SyntheticSpec(n=600, seed=11)))


# acceptance results, printed once at the end of the run
ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    ACCEPTANCE[number] = (ok, detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'} - {detail}")
