import re

_RESULTS = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_ac(\d+)_", report.nodeid)
    if not m:
        return
    key = int(m.group(1))
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        measured = dict(report.user_properties).get("measured", "")
        _RESULTS[key] = (report.outcome, measured, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(_RESULTS):
        outcome, measured, duration = _RESULTS[key]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        tr.write_line(f"AC{key:<2} {verdict}  {duration:7.1f}s  {measured}")
