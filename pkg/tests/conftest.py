"""Shared pytest plumbing: the acceptance-criterion checklist.

Acceptance tests report through :func:`record_criterion`, which prints the
line immediately (visible with ``-s`` or on failure) and queues it for the
end-of-run summary, so a plain ``pytest`` run still ends with one PASS/FAIL
line per criterion.
"""

_CRITERION_LINES: list[str] = []


def record_criterion(number: int, name: str, ok: bool, detail: str) -> None:
    line = f"CRITERION {number:2d} {name}: {'PASS' if ok else 'FAIL'} — {detail}"
    print(line)
    _CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERION_LINES):
            terminalreporter.write_line(line)
