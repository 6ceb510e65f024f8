import pytest

_ACCEPTANCE = {}


def _line(number, ok, detail):
    return f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion checked by the test")


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion.

    Call as ``acceptance(number, ok, detail)``; the line is kept for the
    terminal summary and the test fails when ``ok`` is false.
    """
    def record(number, ok, detail):
        _ACCEPTANCE[number] = _line(number, ok, detail)
        print(_ACCEPTANCE[number])
        assert ok, _ACCEPTANCE[number]

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call" or not report.failed:
        return
    number = marker.args[0]
    if number not in _ACCEPTANCE:
        # the check raised before reaching its verdict
        _ACCEPTANCE[number] = _line(number, False, f"raised {call.excinfo.typename}: {call.excinfo.value}")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
