import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

REFERENCE = (0.5, 1.5, 6.0)


@pytest.fixture(scope="session")
def reference_geometry():
    return REFERENCE


@pytest.fixture(scope="session")
def zone_edge():
    return math.pi / (REFERENCE[1] + REFERENCE[2])

# criterion number -> (passed, title, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
