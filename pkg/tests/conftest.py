import pytest
from hypothesis import strategies as st

from pktsched.cli import bundled_instance
from pktsched.core import Instance, Packet

ACCEPTANCE_LINES = []


@pytest.fixture
def s3():
    """Four packets released at slot 1 with deadlines 1..4 (j, k, f, h), eps = 0.1."""
    return bundled_instance("paper_s3")


@st.composite
def small_instances(draw, max_packets=8, s=4, max_release=6, distinct=True):
    n = draw(st.integers(0, max_packets))
    packets = []
    for i in range(n):
        r = draw(st.integers(0, max_release))
        d = r + draw(st.integers(0, s - 1))
        w = draw(st.floats(0.01, 100.0, allow_nan=False, allow_infinity=False))
        packets.append(Packet(i, r, d, w))
    ws = [p.weight for p in packets]
    if distinct and len(set(ws)) != len(ws):
        packets = [Packet(p.id, p.release, p.deadline, p.weight + 1e-6 * p.id) for p in packets]
    return Instance(packets, s)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])
