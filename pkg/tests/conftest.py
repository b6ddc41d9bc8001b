import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# criterion number -> (title, passed, detail), filled by the acceptance tests
CRITERIA = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        title, ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
