"""Shared test plumbing: collects acceptance outcomes and prints one
PASS/FAIL line per criterion after the run, outside pytest's capture."""

acceptance_results = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for num, desc, ok in sorted(acceptance_results):
        terminalreporter.write_line(
            "ACCEPTANCE %2d: %s - %s" % (num, "PASS" if ok else "FAIL", desc)
        )
