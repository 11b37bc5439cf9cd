from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rtlplan.hdl import load  # noqa: E402

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "rtlplan" / "fixtures"
FIXTURE_FILES = sorted(FIXTURES.glob("*.v"))


@pytest.fixture
def fixture():
    """Load a bundled design by stem, e.g. ``fixture("counter")``."""
    return lambda name: load(FIXTURES / f"{name}.v")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
