from __future__ import annotations

from pathlib import Path

import pytest

from provenact.config import RunConfig, execute_run
from provenact.store import ArtifactStore
from provenact.workload import workload_registry

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def store(tmp_path: Path) -> ArtifactStore:
    return ArtifactStore(tmp_path / "store")


@pytest.fixture
def canonical_run(store):
    """The canonical provenance-on run (history-fed planner, seed 42)."""
    registry = workload_registry()
    result = execute_run(RunConfig(), store, registry)
    return result, registry


ACCEPTANCE_RESULTS: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    criterion = item.get_closest_marker("criterion")
    if criterion is None:
        return
    key = criterion.args[0]
    if report.when == "call" or report.outcome != "passed":
        prev = ACCEPTANCE_RESULTS.get(key, "PASS")
        ACCEPTANCE_RESULTS[key] = "PASS" if prev == "PASS" and report.outcome == "passed" else "FAIL"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion this test checks")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split(".")[0])):
        terminalreporter.write_line(f"{ACCEPTANCE_RESULTS[key]}  {key}")
