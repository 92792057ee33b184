import pytest

ACCEPT_LINES = []


@pytest.fixture
def accept():
    """Record a pass/fail line for an acceptance check, then assert it.

    Lines are echoed in the terminal summary so the full report survives
    pytest's output capture.
    """

    def _accept(name: str, ok: bool, detail: str = ""):
        line = f"[ACCEPT] {name}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        print(line)
        ACCEPT_LINES.append(line)
        assert ok, line

    return _accept


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPT_LINES:
        terminalreporter.section("acceptance report")
        for line in ACCEPT_LINES:
            terminalreporter.write_line(line)
