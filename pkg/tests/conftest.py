import numpy as np
import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record():
    """Append a ``PASS``/``FAIL`` line (``INFO`` when ``ok`` is None) to the acceptance summary."""

    def _record(criterion, name, ok, detail):
        tag = "INFO" if ok is None else ("PASS" if ok else "FAIL")
        line = f"{tag}  [{criterion}] {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
