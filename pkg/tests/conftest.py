import numpy as np
import pytest

from gradtrace import GradientTrace

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def random_trace(rng):
    def make(d, steps, meta=None):
        return GradientTrace(rng.standard_normal((d, steps)), meta or {})
    return make


@pytest.fixture
def acceptance_log():
    """Record one summary line per acceptance criterion."""
    def log(number, name, passed, detail=""):
        line = f"[{number}] {'PASS' if passed else 'FAIL'}  {name}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
    return log


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s[1:s.index("]")])):
            terminalreporter.write_line(line)
