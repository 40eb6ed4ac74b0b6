import pytest

_RESULTS = pytest.StashKey[dict]()
_OUTCOMES = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}
    config.stash[_OUTCOMES] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion: ``criterion(label, passed, detail)``."""

    def record(label, passed, detail=""):
        request.config.stash[_RESULTS][request.node.nodeid] = (label, bool(passed), detail)
        return passed

    return record


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    if "test_acceptance" in item.nodeid and report.when == "call":
        item.config.stash[_OUTCOMES][item.nodeid] = report.passed
    return report


def pytest_terminal_summary(terminalreporter, config):
    outcomes = config.stash[_OUTCOMES]
    if not outcomes:
        return
    results = config.stash[_RESULTS]
    terminalreporter.section("acceptance criteria")
    for nodeid, passed in outcomes.items():
        label, _, detail = results.get(nodeid, (nodeid.split("::")[-1], False, "errored before recording"))
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status} {label}: {detail}")
