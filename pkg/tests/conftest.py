from dataclasses import replace

import pytest

from crumblewall.topology import Coverage, build_topology

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def zero_jitter(t):
    return replace(t, links={k: replace(v, jitter_fraction=0.0) for k, v in t.links.items()})


@pytest.fixture
def full():
    return build_topology(Coverage.FULL, 186)


@pytest.fixture
def sparse():
    return build_topology(Coverage.SPARSE, 186)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
