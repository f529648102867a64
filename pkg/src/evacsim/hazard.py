"""Hazard fronts spreading over the graph, and the ship inclination schedule."""

from __future__ import annotations

import bisect
import heapq
import math
from dataclasses import dataclass, field

from .graph import EvacGraph

INF = math.inf


@dataclass(frozen=True)
class HazardFront:
    origin: int
    onset: float = 0.0
    speed: float = 0.0  # m/s along edges
    # None means the front spreads in all directions; otherwise only along these edge ids
    edges: frozenset[int] | None = None

    def __post_init__(self):
        if self.speed < 0 or self.onset < 0:
            raise ValueError("hazard front speed and onset must be >= 0")

    @property
    def scope(self) -> str:
        return "all_directions" if self.edges is None else "edge_list"


@dataclass(frozen=True)
class HazardState:
    fronts: tuple[HazardFront, ...]
    reach_time: tuple[float, ...]
    # distinct finite reach times, ascending
    change_times: tuple[float, ...] = field(default=(), repr=False)

    @classmethod
    def build(cls, graph: EvacGraph, fronts) -> HazardState:
        fronts = tuple(fronts)
        reach = tuple(compute_reach_times(graph, fronts))
        return cls(fronts, reach, tuple(sorted({r for r in reach if r < INF})))

    @classmethod
    def empty(cls, graph: EvacGraph) -> HazardState:
        return cls((), (INF,) * graph.n_nodes, ())


def compute_reach_times(graph: EvacGraph, fronts) -> list[float]:
    """Earliest time each node is reached by any front (length-metric Dijkstra per front)."""
    best = [INF] * graph.n_nodes
    for front in fronts:
        dist = [INF] * graph.n_nodes
        dist[front.origin] = 0.0
        if front.speed > 0:
            heap = [(0.0, front.origin)]
            while heap:
                d, v = heapq.heappop(heap)
                if d > dist[v]:
                    continue
                for eid, u in graph.adjacency[v]:
                    if front.edges is not None and eid not in front.edges:
                        continue
                    nd = d + graph.edges[eid].length
                    if nd < dist[u]:
                        dist[u] = nd
                        heapq.heappush(heap, (nd, u))
        for v, d in enumerate(dist):
            if d == INF:
                continue
            t = front.onset + (d / front.speed if d > 0 else 0.0)
            if t < best[v]:
                best[v] = t
    return best


def blocked_nodes(state: HazardState, t: float) -> frozenset[int]:
    return frozenset(v for v, r in enumerate(state.reach_time) if r <= t)


@dataclass(frozen=True)
class InclinationSchedule:
    """Piecewise-constant list angle; ``intervals`` is ``((start_s, angle_deg), ...)``."""

    intervals: tuple[tuple[float, float], ...] = ()
    theta_max: float = 40.0
    floor: float = 0.1

    def __post_init__(self):
        starts = [s for s, _ in self.intervals]
        if self.intervals and starts[0] != 0:
            raise ValueError("first inclination interval must start at 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("inclination intervals must be strictly increasing in start time")
        if any(angle < 0 for _, angle in self.intervals):
            raise ValueError("inclination angles must be >= 0")
        if not 0 < self.floor <= 1:
            raise ValueError("floor must lie in (0, 1]")
        if not self.theta_max > 0:
            raise ValueError("theta_max must be positive")

    @classmethod
    def periodic(cls, period_s: float, angles, theta_max: float = 40.0, floor: float = 0.1):
        if not period_s > 0:
            raise ValueError("period_s must be positive")
        return cls(tuple((i * period_s, float(a)) for i, a in enumerate(angles)), theta_max, floor)

    def angle_at(self, t: float) -> float:
        if not self.intervals:
            return 0.0
        i = bisect.bisect_right([s for s, _ in self.intervals], t) - 1
        return self.intervals[max(i, 0)][1]


def inclination_multiplier(schedule: InclinationSchedule | None, t: float) -> float:
    """Speed multiplier m in [floor, 1]; traversal times are divided by m."""
    if schedule is None or not schedule.intervals:
        return 1.0
    theta = schedule.angle_at(t)
    return max(schedule.floor, 1.0 - theta / schedule.theta_max)
