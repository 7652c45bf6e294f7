"""Replays the acceptance verdict lines after the run.

pytest captures stdout of passing tests, so without this the
`criterion N: PASS` lines would only ever surface for failures.
"""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", []) if mod else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
