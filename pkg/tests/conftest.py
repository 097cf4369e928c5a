"""Collects ``criterion``-marked test outcomes into a one-line-per-criterion summary."""
import pytest

_outcomes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    failed = report.failed
    if report.when == "call" or failed:
        previous = _outcomes.get(number)
        if previous is None or previous[0] == "PASS":
            _outcomes[number] = ("FAIL" if failed else "PASS", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        status, title, detail = _outcomes[number]
        line = f"criterion {number:2d} {status}: {title}"
        terminalreporter.write_line(f"{line} ({detail})" if detail else line)
