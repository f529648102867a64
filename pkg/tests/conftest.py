from __future__ import annotations

import random

import pytest

from evacsim.graph import EdgeKind, Node, NodeKind, build_graph

A, B, C, X = 0, 1, 2, 3

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def make_g1():
    """Fixture G1: A-B 10 m, B-X 10 m, A-C 5 m, C-X 30 m, exit X."""
    nodes = [
        Node(A, NodeKind.CABIN, 2, 2),
        Node(B, NodeKind.CORRIDOR, 2, 4),
        Node(C, NodeKind.CORRIDOR, 2, 4),
        Node(X, NodeKind.EXIT, 2, float("inf")),
    ]
    edges = [
        (A, B, EdgeKind.PASSAGEWAY, 10.0, None),
        (B, X, EdgeKind.PASSAGEWAY, 10.0, None),
        (A, C, EdgeKind.PASSAGEWAY, 5.0, None),
        (C, X, EdgeKind.PASSAGEWAY, 30.0, None),
    ]
    return build_graph(nodes, edges)


def random_graph(rng: random.Random, n_max: int = 10, capacity: int | None = None):
    """Random connected graph on 2..n_max nodes; the last node is the exit."""
    n = rng.randint(2, n_max)
    nodes = [Node(i, NodeKind.CORRIDOR, 2, 4) for i in range(n - 1)] + [Node(n - 1, NodeKind.EXIT, 2, float("inf"))]
    pairs = set()
    for i in range(1, n):
        j = rng.randrange(i)
        pairs.add((j, i))
    for _ in range(rng.randint(0, n)):
        a, b = rng.sample(range(n), 2)
        pairs.add((min(a, b), max(a, b)))
    edges = [(a, b, EdgeKind.PASSAGEWAY, round(rng.uniform(0.5, 40.0), rng.choice([0, 1, 3])) or 1.0, capacity) for a, b in sorted(pairs)]
    return build_graph(nodes, edges)


@pytest.fixture
def g1():
    return make_g1()


@pytest.fixture
def acceptance_report(request):
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def report(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        lines.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
