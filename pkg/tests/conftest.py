import pytest

_acceptance: dict = {}


def pytest_runtest_logreport(report):
    # a criterion fails if any phase (setup, call, teardown) fails
    info = _acceptance.get(report.nodeid)
    if info is not None and (report.when == "call" or report.failed):
        info["passed"] = info.get("passed", True) and report.passed


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is not None:
            number, title = marker.args
            _acceptance[item.nodeid] = {"number": number, "title": title}


def pytest_terminal_summary(terminalreporter):
    ran = [info for info in _acceptance.values() if "passed" in info]
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for info in sorted(ran, key=lambda i: i["number"]):
        status = "PASS" if info["passed"] else "FAIL"
        terminalreporter.write_line(f"{status}  AC{info['number']:>2}  {info['title']}")
