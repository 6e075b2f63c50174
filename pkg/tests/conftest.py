import re

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: one of the numbered acceptance criteria")


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)_", report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("acceptance", "")
        _results[int(m.group(1))] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        verdict, detail = _results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {verdict}  {detail}")
