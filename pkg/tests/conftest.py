import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, ok, seconds, detail in sorted(ACCEPTANCE):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {num}. {name} ({seconds:.2f} s) {detail}")
