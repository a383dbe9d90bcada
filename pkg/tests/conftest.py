from __future__ import annotations

import random

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from gpmrpp.program import random_program
from gpmrpp.workspace import GeneratorParams, ProblemInstance, RobotSpec, Workspace, build_problem, generate_mst

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def chain(n: int) -> Workspace:
    return Workspace.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star(leaves: int) -> Workspace:
    return Workspace.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def problem(ws: Workspace, *pairs: tuple[int, int], label: str = "") -> ProblemInstance:
    return ProblemInstance(ws, tuple(RobotSpec(i, s, g) for i, (s, g) in enumerate(pairs)), label)


@st.composite
def random_trees(draw, max_nodes: int = 30):
    """Random labelled trees: node ``i`` attaches to a uniformly drawn earlier node."""
    n = draw(st.integers(min_value=1, max_value=max_nodes))
    parents = [draw(st.integers(min_value=0, max_value=i - 1)) for i in range(1, n)]
    return Workspace.from_edges(n, [(p, i + 1) for i, p in enumerate(parents)])


@st.composite
def random_problems(draw, max_nodes: int = 25, max_robots: int = 8):
    seed = draw(st.integers(min_value=0, max_value=2**32))
    rng = random.Random(seed)
    while True:
        ws = generate_mst(GeneratorParams(seed_depth=rng.randint(2, 4)), rng)
        if 3 <= ws.node_count <= max_nodes:
            break
    k = rng.randint(1, min(max_robots, ws.node_count - 2))
    return build_problem(ws, k, rng)


@st.composite
def random_programs(draw, max_depth: int = 5):
    seed = draw(st.integers(min_value=0, max_value=2**32))
    depth = draw(st.integers(min_value=1, max_value=max_depth))
    return random_program(depth, random.Random(seed))


@pytest.fixture
def rng():
    return random.Random(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance line: ``report(number, passed, detail)``."""

    def _report(number: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
