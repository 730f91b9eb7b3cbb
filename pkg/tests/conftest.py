import pytest

from ncta_sim.channel import Frame


@pytest.fixture
def frames():
    """Factory: user ids -> {user: Frame} with seq 0 arriving in slot 0."""
    def make(*users, slot=0):
        return {u: Frame(u, 0, slot) for u in users}
    return make


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
