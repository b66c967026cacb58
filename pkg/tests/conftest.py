import pytest

from taskrt import RuntimeConfig, WorkerPool, set_watchdog
from taskrt.runtime import get_watchdog

WATCHDOG_SECONDS = 60.0


@pytest.fixture(autouse=True)
def _watchdog():
    previous = get_watchdog()
    set_watchdog(WATCHDOG_SECONDS)
    yield
    set_watchdog(previous)


@pytest.fixture
def pool1():
    with WorkerPool(RuntimeConfig(1), name="t1") as pool:
        yield pool


@pytest.fixture
def pool4():
    with WorkerPool(RuntimeConfig(4), name="t4") as pool:
        yield pool


@pytest.fixture(scope="session")
def pools():
    """Lazily created pools keyed by worker count, shared across a session."""
    created = {}

    def get(workers):
        if workers not in created:
            created[workers] = WorkerPool(RuntimeConfig(workers), name=f"s{workers}")
        return created[workers]

    yield get
    for pool in created.values():
        pool.shutdown()


_acceptance = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        detail = ""
        if report.skipped and isinstance(report.longrepr, tuple):
            detail = f" ({report.longrepr[2]})"
        _acceptance.append((marker.args[0], status, marker.args[1], detail))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, title, detail in sorted(_acceptance):
        terminalreporter.write_line(f"criterion {number}: {status}  {title}{detail}")
