"""Shared helpers: one summary line per acceptance criterion."""

ACCEPTANCE_LINES = []


def check(num, name, ok, detail=""):
    """Record and print one ``ACCEPTANCE`` line, then assert ``ok``."""
    line = f"ACCEPTANCE {num:02d} {'PASS' if ok else 'FAIL'} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
