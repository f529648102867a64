"""Synthetic multi-deck passenger-ship layouts.

Each deck has two parallel spinal corridors (port and starboard) joined by
cross passages, with cabins on both sides of each spine. A cabin opens onto
its own corridor node and, through an optional second door, onto the next
one along. Staircases connect landings on adjacent decks. The lowest deck
carries the lobby, the only exit and the restaurant zone.
"""

from __future__ import annotations

import math
import random

from .errors import InfeasibleLayout
from .graph import EdgeKind, EvacGraph, Node, NodeKind, Speeds, build_graph, validate

SPACING_M = 5.0  # corridor node spacing (one cabin width)
SPINE_GAP_M = 4.0  # cross passage length between the spines
CABIN_DOOR_M = 2.5
LANDING_M = 5.0
STAIR_M = 6.0
LOBBY_M = 3.0
EXIT_M = 4.0
CROSS_EVERY = 1
RESTAURANT_ROWS = 4
RESTAURANT_COLS = 6
RESTAURANT_CELL_M = 3.0
LENGTH_JITTER = 0.1
STAIRWELL_AT = (0.5, 0.5)  # fractional spine position of each deck pair's stairwell

# concurrency overrides; None keeps the length-proportional default
DOOR_CAPACITY = 1  # cabin doors are single file
CORRIDOR_CAPACITY = None
STAIR_CAPACITY = 3
LOBBY_CAPACITY = 4
EXIT_CAPACITY = 12

NODE_CAPACITY = {NodeKind.CABIN: 2, NodeKind.RESTAURANT: 10, NodeKind.LOBBY: 50}

FIRST_DECK = 2
MAX_DECKS = 3


def _fixed_nodes(stairs: int) -> int:
    # lobby + exit + restaurant + two landings per staircase
    return 2 + RESTAURANT_ROWS * RESTAURANT_COLS + 2 * stairs


def _solve_cabins(decks: int, stairs: int, target_nodes: int) -> tuple[int, list[int]]:
    """Shortest spine whose cabin slots can absorb the remaining node budget."""
    fixed = _fixed_nodes(stairs)
    for k in range(2, 10_000):
        cabins = target_nodes - fixed - decks * 2 * k
        if cabins < 0:
            break
        if cabins <= decks * 4 * k:
            base, extra = divmod(cabins, decks)
            return k, [base + (1 if d < extra else 0) for d in range(decks)]
    raise InfeasibleLayout(f"cannot reach {target_nodes} nodes with {decks} decks and {stairs} stairs")


def generate_layout(
    decks: int = 3,
    cabins_per_deck: int | None = None,
    stairs: int = 5,
    seed: int = 0,
    *,
    target_nodes: int = 346,
    target_passageways: int | None = 600,
    speeds: Speeds = Speeds(),
) -> EvacGraph:
    """Deterministic ship layout for the given arguments.

    With ``cabins_per_deck=None`` the spine length and cabin count are solved
    so the graph has exactly ``target_nodes`` nodes. Optional passages (second
    cabin doors, extra cross passages, restaurant diagonals) are then added in
    seeded random order until the passageway count reaches
    ``target_passageways`` or the pool runs out. Edge lengths carry a seeded
    jitter of up to 10%.
    """
    if not 1 <= decks <= MAX_DECKS:
        raise InfeasibleLayout(f"decks must be in 1..{MAX_DECKS}, got {decks}")
    if stairs < decks - 1:
        raise InfeasibleLayout(f"{stairs} staircases cannot link {decks} decks")
    if decks == 1 and stairs:
        raise InfeasibleLayout("a single deck has no staircases")
    if cabins_per_deck is None:
        k, cabins = _solve_cabins(decks, stairs, target_nodes)
    else:
        if cabins_per_deck < 0:
            raise InfeasibleLayout("cabins_per_deck must be >= 0")
        k = max(2, math.ceil(cabins_per_deck / 4))
        cabins = [cabins_per_deck] * decks

    rng = random.Random(seed)
    nodes: list[Node] = []
    edges: list[tuple[int, int, EdgeKind, float, int | None]] = []
    optional: list[tuple[int, int, EdgeKind, float, int | None]] = []

    def add_node(kind: NodeKind, deck: int, x: float, y: float) -> int:
        cap = math.inf if kind == NodeKind.EXIT else NODE_CAPACITY.get(kind, 4)
        nodes.append(Node(len(nodes), kind, deck, cap, (round(x, 3), round(y, 3))))
        return len(nodes) - 1

    def add_edge(a, b, length, kind=EdgeKind.PASSAGEWAY, cap=None, pool=edges):
        length = round(length * (1.0 + LENGTH_JITTER * (2.0 * rng.random() - 1.0)), 3)
        pool.append((a, b, kind, length, cap))

    spines: list[tuple[list[int], list[int]]] = []
    for d in range(decks):
        deck = FIRST_DECK + d
        port = [add_node(NodeKind.CORRIDOR, deck, i * SPACING_M, SPINE_GAP_M / 2) for i in range(k)]
        stbd = [add_node(NodeKind.CORRIDOR, deck, i * SPACING_M, -SPINE_GAP_M / 2) for i in range(k)]
        spines.append((port, stbd))
        for line in (port, stbd):
            for i in range(k - 1):
                add_edge(line[i], line[i + 1], SPACING_M, cap=CORRIDOR_CAPACITY)
        for i in range(k):
            pool = edges if (i % CROSS_EVERY == 0 or i == k - 1) else optional
            add_edge(port[i], stbd[i], SPINE_GAP_M, pool=pool)

        # outboard rows first, then inboard; alternate port/starboard along the ship
        slots = [(outboard, side, i) for outboard in (True, False) for i in range(k) for side in (0, 1)]
        for outboard, side, i in slots[: cabins[d]]:
            line = (port, stbd)[side]
            sign = 1 if side == 0 else -1
            offset = SPINE_GAP_M / 2 + CABIN_DOOR_M if outboard else SPINE_GAP_M / 2 - 1.0
            c = add_node(NodeKind.CABIN, deck, i * SPACING_M, sign * offset)
            add_edge(c, line[i], CABIN_DOOR_M, cap=DOOR_CAPACITY)
            if i + 1 < k:
                add_edge(c, line[i + 1], math.hypot(SPACING_M, CABIN_DOOR_M), cap=DOOR_CAPACITY, pool=optional)

    # staircases between adjacent decks, one stairwell per deck pair, lower pairs first
    pair_stairs = [0] * max(decks - 1, 0)
    for s in range(stairs):
        pair_stairs[s % len(pair_stairs)] += 1
    for pair, count in enumerate(pair_stairs):
        i = min(k - 1, int(round(STAIRWELL_AT[pair % len(STAIRWELL_AT)] * (k - 1))))
        for j in range(count):
            ends = []
            for d in (pair, pair + 1):
                port, stbd = spines[d]
                land = add_node(NodeKind.STAIR_LANDING, FIRST_DECK + d, i * SPACING_M, (j - (count - 1) / 2) * 1.5)
                add_edge(land, port[i], LANDING_M)
                add_edge(land, stbd[i], LANDING_M)
                ends.append(land)
            add_edge(ends[0], ends[1], STAIR_M, EdgeKind.STAIRCASE, cap=STAIR_CAPACITY)

    # lobby and exit at the fore end of the lowest deck
    port, stbd = spines[0]
    lobby = add_node(NodeKind.LOBBY, FIRST_DECK, -SPACING_M, 0.0)
    add_edge(lobby, port[0], LOBBY_M, cap=LOBBY_CAPACITY)
    add_edge(lobby, stbd[0], LOBBY_M, cap=LOBBY_CAPACITY)
    exit_node = add_node(NodeKind.EXIT, FIRST_DECK, -SPACING_M - EXIT_M, 0.0)
    add_edge(exit_node, lobby, EXIT_M, cap=EXIT_CAPACITY)

    # restaurant grid aft of the lowest deck
    x0 = k * SPACING_M
    grid = [
        [
            add_node(
                NodeKind.RESTAURANT,
                FIRST_DECK,
                x0 + c * RESTAURANT_CELL_M,
                (r - (RESTAURANT_ROWS - 1) / 2) * RESTAURANT_CELL_M,
            )
            for c in range(RESTAURANT_COLS)
        ]
        for r in range(RESTAURANT_ROWS)
    ]
    for r in range(RESTAURANT_ROWS):
        for c in range(RESTAURANT_COLS):
            if c + 1 < RESTAURANT_COLS:
                add_edge(grid[r][c], grid[r][c + 1], RESTAURANT_CELL_M)
            if r + 1 < RESTAURANT_ROWS:
                add_edge(grid[r][c], grid[r + 1][c], RESTAURANT_CELL_M)
            if r + 1 < RESTAURANT_ROWS and c + 1 < RESTAURANT_COLS:
                add_edge(grid[r][c], grid[r + 1][c + 1], RESTAURANT_CELL_M * math.sqrt(2), pool=optional)
    add_edge(grid[0][0], stbd[-1], RESTAURANT_CELL_M)
    add_edge(grid[-1][0], port[-1], RESTAURANT_CELL_M)

    if target_passageways is not None:
        rng.shuffle(optional)
        need = target_passageways - sum(1 for e in edges if e[2] == EdgeKind.PASSAGEWAY)
        edges.extend(optional[: max(need, 0)])

    graph = build_graph(nodes, edges, speeds)
    problems = validate(graph)
    if problems:
        raise InfeasibleLayout("; ".join(problems[:5]))
    return graph
