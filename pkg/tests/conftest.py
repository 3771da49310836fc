import numpy as np
import pytest

_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, n):
    A = rng.standard_normal((n, n))
    return A @ A.T + np.eye(n)


@pytest.fixture
def acceptance_log(request):
    """Record ``(number, passed, detail)`` for the end-of-session criteria table."""
    table = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number, passed, detail):
        table[number] = (passed, detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    table = config.stash.get(_ACCEPTANCE, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(table):
        passed, detail = table[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
