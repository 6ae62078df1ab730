import json
import os
from pathlib import Path

import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []
RESULTS_FILE = Path(__file__).resolve().parents[1] / "acceptance_results.json"


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion."""
    results = {}

    def record(criterion: int, passed: bool, detail: str, data=None):
        line = f"CRITERION {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append((criterion, line))
        print("\n" + line)
        if data is not None:
            results[str(criterion)] = dict(passed=bool(passed), detail=detail, data=data)
            old = json.loads(RESULTS_FILE.read_text()) if RESULTS_FILE.exists() else {}
            old.update(results)
            tmp = RESULTS_FILE.with_suffix(".tmp")
            tmp.write_text(json.dumps(old, indent=1, default=float))
            os.replace(tmp, RESULTS_FILE)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
