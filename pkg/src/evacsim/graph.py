"""Evacuation graph: node/edge types, deadline budget, traversal times, validation."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .errors import InvalidSpeed, NegativeDeadline

TYPICAL_SPEED = 0.67  # m/s, normal walking on a passenger ship
WORST_CASE_SPEED = 0.067  # m/s

PASSAGEWAY_CAPACITY_PER_M = 0.8
STAIRCASE_CAPACITY_PER_M = 0.4


class NodeKind(str, Enum):
    CABIN = "cabin"
    CORRIDOR = "corridor"
    LOBBY = "lobby"
    RESTAURANT = "restaurant"
    STAIR_LANDING = "stair_landing"
    EXIT = "exit"


class EdgeKind(str, Enum):
    PASSAGEWAY = "passageway"
    STAIRCASE = "staircase"


# placement capacity when the scenario does not give one; exit is unbounded
DEFAULT_NODE_CAPACITY = {
    NodeKind.CABIN: 2,
    NodeKind.CORRIDOR: 4,
    NodeKind.LOBBY: 50,
    NodeKind.RESTAURANT: 10,
    NodeKind.STAIR_LANDING: 4,
}


@dataclass(frozen=True)
class Speeds:
    typical_mps: float = TYPICAL_SPEED
    worst_case_mps: float = WORST_CASE_SPEED


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind
    deck: int
    capacity: float
    position: tuple[float, float] | None = None


@dataclass(frozen=True)
class Edge:
    id: int
    a: int
    b: int
    kind: EdgeKind
    length: float
    capacity: int
    tau_typ: float
    tau_wc: float

    def other(self, v: int) -> int:
        return self.b if v == self.a else self.a


@dataclass(frozen=True)
class DeadlineBudget:
    t_s: float
    t_a: float
    t_el: float
    t_d: float


def compute_deadline(t_s: float, t_a: float, t_el: float) -> DeadlineBudget:
    """Time left to reach the exit: survival time minus alarm delay minus embarkation/launch."""
    if min(t_s, t_a, t_el) < 0:
        raise NegativeDeadline(f"negative component: T_S={t_s}, T_A={t_a}, T_EL={t_el}")
    if t_s < t_a + t_el:
        raise NegativeDeadline(f"T_S={t_s} < T_A + T_EL = {t_a + t_el}")
    # the check above holds, so a negative difference is only round-off
    return DeadlineBudget(t_s, t_a, t_el, max(0.0, t_s - t_a - t_el))


def edge_times(length: float, typical_speed: float, worst_case_speed: float) -> tuple[float, float]:
    if not (typical_speed > 0 and worst_case_speed > 0):
        raise InvalidSpeed("speeds must be positive")
    if worst_case_speed > typical_speed:
        raise InvalidSpeed(f"worst-case speed {worst_case_speed} exceeds typical speed {typical_speed}")
    if not length > 0:
        raise ValueError(f"edge length must be positive, got {length}")
    return length / typical_speed, length / worst_case_speed


def default_edge_capacity(kind: EdgeKind, length: float) -> int:
    per_m = STAIRCASE_CAPACITY_PER_M if kind == EdgeKind.STAIRCASE else PASSAGEWAY_CAPACITY_PER_M
    # round half up, not banker's rounding
    return max(1, int(math.floor(length * per_m + 0.5)))


def make_edge(
    eid: int,
    a: int,
    b: int,
    kind: EdgeKind,
    length: float,
    speeds: Speeds,
    capacity: int | None = None,
) -> Edge:
    tau_typ, tau_wc = edge_times(length, speeds.typical_mps, speeds.worst_case_mps)
    if capacity is None:
        capacity = default_edge_capacity(kind, length)
    return Edge(eid, a, b, EdgeKind(kind), float(length), int(capacity), tau_typ, tau_wc)


@dataclass(frozen=True, eq=False)
class EvacGraph:
    """Immutable ship topology with a single exit.

    ``adjacency[v]`` lists ``(edge_id, neighbor)`` pairs sorted by neighbor id.
    """

    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    exit: int
    speeds: Speeds = Speeds()
    adjacency: tuple[tuple[tuple[int, int], ...], ...] = field(default=(), repr=False)
    # distance maps keyed by blocked set, filled lazily by routing
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.adjacency:
            adj: list[list[tuple[int, int]]] = [[] for _ in self.nodes]
            for e in self.edges:
                if 0 <= e.a < len(adj) and 0 <= e.b < len(adj):
                    adj[e.a].append((e.id, e.b))
                    if e.b != e.a:
                        adj[e.b].append((e.id, e.a))
            object.__setattr__(
                self, "adjacency", tuple(tuple(sorted(x, key=lambda p: (p[1], p[0]))) for x in adj)
            )

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def nodes_of_kind(self, kind: NodeKind) -> list[int]:
        return [n.id for n in self.nodes if n.kind == kind]

    def edge_between(self, u: int, v: int) -> Edge | None:
        for eid, w in self.adjacency[u]:
            if w == v:
                return self.edges[eid]
        return None

    def counts(self) -> dict[str, int]:
        out = {"nodes": len(self.nodes), "passageway": 0, "staircase": 0}
        for e in self.edges:
            out[e.kind.value] += 1
        return out

    def __eq__(self, other):
        if not isinstance(other, EvacGraph):
            return NotImplemented
        return (self.nodes, self.edges, self.exit, self.speeds) == (
            other.nodes,
            other.edges,
            other.exit,
            other.speeds,
        )

    def __hash__(self):
        return hash((self.nodes, self.edges, self.exit))


def build_graph(
    nodes: list[Node],
    edges: list[tuple[int, int, EdgeKind, float, int | None]],
    speeds: Speeds = Speeds(),
) -> EvacGraph:
    """Build a graph from raw edge tuples ``(a, b, kind, length, capacity|None)``.

    Edge ids follow list order. The exit is the (first) node of kind exit, or -1.
    """
    built = [make_edge(i, a, b, kind, length, speeds, cap) for i, (a, b, kind, length, cap) in enumerate(edges)]
    exits = [n.id for n in nodes if n.kind == NodeKind.EXIT]
    return EvacGraph(tuple(nodes), tuple(built), exits[0] if exits else -1, speeds)


def validate(graph: EvacGraph) -> list[str]:
    """Return a list of human-readable invariant violations (empty when valid)."""
    problems: list[str] = []
    n = len(graph.nodes)
    sp = graph.speeds
    if not (sp.typical_mps > 0 and sp.worst_case_mps > 0 and sp.worst_case_mps <= sp.typical_mps):
        problems.append(f"speeds invalid: typical {sp.typical_mps}, worst-case {sp.worst_case_mps}")

    for i, node in enumerate(graph.nodes):
        if node.id != i:
            problems.append(f"node ids not dense: position {i} holds id {node.id}")
        if node.kind != NodeKind.EXIT and not node.capacity >= 1:
            problems.append(f"node {node.id} capacity {node.capacity} < 1")
    exits = [node.id for node in graph.nodes if node.kind == NodeKind.EXIT]
    if not exits:
        problems.append("no exit")
    elif len(exits) > 1:
        problems.append(f"multiple exits: {exits}")
    elif graph.exit != exits[0]:
        problems.append(f"exit field {graph.exit} does not match exit node {exits[0]}")

    seen_pairs: dict[tuple[int, int], int] = {}
    for i, e in enumerate(graph.edges):
        if e.id != i:
            problems.append(f"edge ids not dense: position {i} holds id {e.id}")
        if not (0 <= e.a < n and 0 <= e.b < n):
            problems.append(f"edge {e.id} references unknown node")
            continue
        if e.a == e.b:
            problems.append(f"edge {e.id} is a self-loop on node {e.a}")
        pair = (min(e.a, e.b), max(e.a, e.b))
        if pair in seen_pairs:
            problems.append(f"duplicate edge {e.id} between {pair[0]} and {pair[1]} (first: edge {seen_pairs[pair]})")
        else:
            seen_pairs[pair] = e.id
        if not e.length > 0:
            problems.append(f"edge {e.id} length {e.length} <= 0")
        if e.capacity < 1:
            problems.append(f"edge {e.id} capacity {e.capacity} < 1")
        if not e.tau_typ > 0:
            problems.append(f"edge {e.id} typical time not positive")
        if e.tau_typ > e.tau_wc:
            problems.append(f"edge {e.id} typical exceeds worst-case")
        da, db = graph.nodes[e.a].deck, graph.nodes[e.b].deck
        if e.kind == EdgeKind.STAIRCASE and abs(da - db) != 1:
            problems.append(f"edge {e.id} staircase joins decks {da} and {db} (not adjacent)")
        if e.kind == EdgeKind.PASSAGEWAY and da != db:
            problems.append(f"edge {e.id} passageway joins decks {da} and {db}")

    expected = [[] for _ in range(n)]
    for e in graph.edges:
        if 0 <= e.a < n and 0 <= e.b < n and e.a != e.b:
            expected[e.a].append((e.id, e.b))
            expected[e.b].append((e.id, e.a))
    if len(graph.adjacency) != n or any(sorted(expected[v]) != sorted(graph.adjacency[v]) for v in range(n)):
        problems.append("adjacency inconsistent with edge list")

    if len(exits) == 1 and 0 <= exits[0] < n:
        reach = [False] * n
        reach[exits[0]] = True
        todo = deque([exits[0]])
        while todo:
            v = todo.popleft()
            for _, u in expected[v]:
                if not reach[u]:
                    reach[u] = True
                    todo.append(u)
        for v in range(n):
            if not reach[v]:
                problems.append(f"node {v} cannot reach exit")
    return problems
