import sys


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    report = getattr(module, "ACCEPTANCE_REPORT", None)
    if not report:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(report):
        terminalreporter.write_line(report[number])
