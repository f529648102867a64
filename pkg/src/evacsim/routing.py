"""Deadline-aware next-hop routing.

Each decision picks the neighbour with the smallest (congestion adjusted)
typical time to the exit among the neighbours from which the exit is still
reachable within the evacuee's remaining budget under worst-case traversal.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .errors import ExitBlocked
from .graph import EvacGraph
from .info import InformationView

INF = math.inf

# slack for floating-point round-off in budget comparisons (seconds)
BUDGET_EPS = 1e-6

GO = "go"
WAIT = "wait"
TRAPPED = "trapped"


@dataclass(frozen=True)
class DistanceMaps:
    worst_case: tuple[float, ...]  # shortest worst-case time to exit
    typical: tuple[float, ...]  # shortest typical time to exit
    blocked_version: int = 0


@dataclass(frozen=True)
class Recommendation:
    verdict: str
    next: int | None = None
    edge: int | None = None
    deadline_at_risk: bool = False
    estimated_typical_remaining: float = INF


def _dijkstra_to(graph: EvacGraph, target: int, blocked, weight: str) -> list[float]:
    dist = [INF] * graph.n_nodes
    dist[target] = 0.0
    heap = [(0.0, target)]
    edges = graph.edges
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for eid, u in graph.adjacency[v]:
            if u in blocked:
                continue
            # weight first so the sum matches a path accumulated from the exit backwards
            nd = getattr(edges[eid], weight) + d
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


def compute_distance_maps(graph: EvacGraph, blocked=frozenset(), blocked_version: int = 0) -> DistanceMaps:
    if graph.exit in blocked:
        raise ExitBlocked(f"exit node {graph.exit} is blocked")
    worst = _dijkstra_to(graph, graph.exit, blocked, "tau_wc")
    typical = _dijkstra_to(graph, graph.exit, blocked, "tau_typ")
    for v in blocked:
        worst[v] = typical[v] = INF
    return DistanceMaps(tuple(worst), tuple(typical), blocked_version)


def cached_distance_maps(graph: EvacGraph, blocked: frozenset, blocked_version: int = 0) -> DistanceMaps:
    """Memoised ``compute_distance_maps``; graphs are immutable so the cache lives on the graph."""
    cache = graph._cache.setdefault("maps", {})
    maps = cache.get(blocked)
    if maps is None:
        maps = compute_distance_maps(graph, blocked, blocked_version)
        cache[blocked] = maps
    elif maps.blocked_version != blocked_version:
        maps = DistanceMaps(maps.worst_case, maps.typical, blocked_version)
    return maps


def congestion_adjusted_typical(graph: EvacGraph, eid: int, view: InformationView | None) -> float:
    edge = graph.edges[eid]
    if view is None:
        return edge.tau_typ
    return edge.tau_typ * (1.0 + view.snapshot.edge_load(eid) / edge.capacity)


def next_hop(
    graph: EvacGraph,
    maps: DistanceMaps,
    v: int,
    budget: float,
    view: InformationView | None = None,
    *,
    congestion: bool = True,
    wc_scale: float = 1.0,
) -> Recommendation:
    """Recommend the next node for an evacuee at ``v`` holding ``budget`` seconds.

    Among unblocked neighbours ``u`` with ``wc_scale * (tau_wc + W[u]) <= budget``
    choose the one minimising ``tau_hat_typ + D[u]`` (ties: smallest node id).
    With no such neighbour fall back to the smallest worst-case bound and flag the
    deadline as at risk. ``trapped`` when every neighbour is blocked or none of
    them leads to the exit.
    """
    blocked = view.snapshot.blocked if view is not None else ()
    load = view.snapshot.edge_load if (view is not None and congestion) else None
    W, D = maps.worst_case, maps.typical
    edges = graph.edges
    limit = budget + BUDGET_EPS

    best = None  # (cost, u, eid)
    fallback = None  # (bound, u, eid)
    for eid, u in graph.adjacency[v]:
        if u in blocked:
            continue
        e = edges[eid]
        bound = (e.tau_wc + W[u]) * wc_scale
        if bound <= limit:
            tau = e.tau_typ
            if load is not None:
                tau *= 1.0 + load(eid) / e.capacity
            cand = (tau + D[u], u, eid)
            if best is None or cand < best:
                best = cand
        elif best is None:
            cand = (bound, u, eid)
            if fallback is None or cand < fallback:
                fallback = cand
    if best is not None:
        return Recommendation(GO, best[1], best[2], False, best[0])
    if fallback is None or fallback[0] == INF:
        return Recommendation(TRAPPED)
    u, eid = fallback[1], fallback[2]
    return Recommendation(GO, u, eid, True, congestion_adjusted_typical(graph, eid, view if congestion else None) + D[u])


def update_budget(budget: float, elapsed: float) -> float:
    if elapsed < 0:
        raise ValueError(f"elapsed time must be >= 0, got {elapsed}")
    return budget - elapsed
