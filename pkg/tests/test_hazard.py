from __future__ import annotations

import math
import random

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import random_graph
from evacsim.engine import realized_traversal_time
from evacsim.graph import EdgeKind, Node, NodeKind, build_graph
from evacsim.hazard import (
    HazardFront,
    HazardState,
    InclinationSchedule,
    blocked_nodes,
    compute_reach_times,
    inclination_multiplier,
)
from oracles import brute_force_reach

PROPS = settings(max_examples=120, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def pair_graph():
    nodes = [Node(0, NodeKind.CORRIDOR, 2, 4), Node(1, NodeKind.CORRIDOR, 2, 4), Node(2, NodeKind.EXIT, 2, math.inf)]
    return build_graph(nodes, [(0, 1, EdgeKind.PASSAGEWAY, 10.0, None), (1, 2, EdgeKind.PASSAGEWAY, 50.0, None)])


class TestReachTimes:
    def test_neighbour_at_ten_metres(self):
        reach = compute_reach_times(pair_graph(), [HazardFront(0, 0.0, 1.0)])
        assert reach[:2] == [0.0, 10.0]

    def test_zero_speed_stays_put(self):
        reach = compute_reach_times(pair_graph(), [HazardFront(0, 0.0, 0.0)])
        assert reach == [0.0, math.inf, math.inf]

    def test_two_fronts_pointwise_min(self):
        g = pair_graph()
        f1, f2 = HazardFront(0, 0.0, 1.0), HazardFront(1, 3.0, 0.5)
        both = compute_reach_times(g, [f1, f2])
        assert both == [min(a, b) for a, b in zip(compute_reach_times(g, [f1]), compute_reach_times(g, [f2]))]

    def test_edge_scope(self):
        g = pair_graph()
        f = HazardFront(0, 0.0, 1.0, frozenset({0}))
        assert f.scope == "edge_list"
        assert compute_reach_times(g, [f]) == [0.0, 10.0, math.inf]

    def test_invalid_front(self):
        with pytest.raises(ValueError):
            HazardFront(0, -1.0, 1.0)

    @PROPS
    @given(st.integers(0, 2**32 - 1))
    def test_oracle_equivalence(self, seed):
        rng = random.Random(seed)
        g = random_graph(rng)
        fronts = []
        for _ in range(rng.randint(1, 2)):
            scope = None
            if rng.random() < 0.3:
                scope = frozenset(e.id for e in g.edges if rng.random() < 0.6)
            fronts.append(HazardFront(rng.randrange(g.n_nodes), rng.choice([0.0, 2.5, 10.0]), rng.choice([0.0, 0.5, 1.0, 1.3]), scope))
        assert compute_reach_times(g, fronts) == brute_force_reach(g, fronts)


class TestBlocked:
    def test_examples(self):
        state = HazardState.build(pair_graph(), [HazardFront(0, 5.0, 1.0)])
        assert blocked_nodes(state, 0.0) == frozenset()
        assert blocked_nodes(state, 15.0) == {0, 1}
        assert blocked_nodes(state, 1e12) == {0, 1, 2}

    def test_origin_at_onset(self):
        state = HazardState.build(pair_graph(), [HazardFront(0, 5.0, 1.0)])
        assert blocked_nodes(state, 5.0) == {0}

    @PROPS
    @given(st.integers(0, 2**32 - 1), st.floats(0, 200), st.floats(0, 200))
    def test_monotone(self, seed, t1, dt):
        rng = random.Random(seed)
        g = random_graph(rng)
        state = HazardState.build(g, [HazardFront(rng.randrange(g.n_nodes), rng.uniform(0, 20), rng.uniform(0, 2))])
        assert blocked_nodes(state, t1) <= blocked_nodes(state, t1 + dt)

    def test_change_times(self):
        state = HazardState.build(pair_graph(), [HazardFront(0, 5.0, 1.0)])
        assert state.change_times == (5.0, 15.0, 65.0)


class TestInclination:
    def test_upright(self):
        assert inclination_multiplier(InclinationSchedule(((0.0, 0.0),)), 10.0) == 1.0

    def test_twenty_degrees(self):
        assert inclination_multiplier(InclinationSchedule(((0.0, 20.0),)), 0.0) == 0.5

    def test_clamped(self):
        s = InclinationSchedule(((0.0, 45.0),))
        assert inclination_multiplier(s, 0.0) == 0.1
        assert inclination_multiplier(InclinationSchedule(((0.0, 40.0),)), 0.0) == 0.1

    def test_schedule_steps(self):
        s = InclinationSchedule.periodic(60.0, [0, 10, 20])
        assert [inclination_multiplier(s, t) for t in (0, 59.9, 60, 130, 1e6)] == [1.0, 1.0, 0.75, 0.5, 0.5]

    def test_empty_schedule_identity(self):
        assert inclination_multiplier(None, 5.0) == 1.0
        assert inclination_multiplier(InclinationSchedule(), 5.0) == 1.0

    @pytest.mark.parametrize(
        "intervals,floor",
        [(((1.0, 0.0),), 0.1), (((0.0, 0.0), (0.0, 1.0)), 0.1), (((0.0, -1.0),), 0.1), (((0.0, 0.0),), 0.0)],
    )
    def test_invalid(self, intervals, floor):
        with pytest.raises(ValueError):
            InclinationSchedule(intervals, 40.0, floor)

    @given(st.floats(0, 90), st.floats(0.01, 1.0))
    def test_multiplier_range(self, theta, floor):
        m = inclination_multiplier(InclinationSchedule(((0.0, theta),), 40.0, floor), 0.0)
        assert floor <= m <= 1.0


class TestRealizedTime:
    def setup_method(self):
        self.edge = pair_graph().edges[0]

    def test_typical(self):
        assert round(realized_traversal_time(self.edge, 1.0, "typical"), 2) == 14.93

    def test_worst_case(self):
        assert round(realized_traversal_time(self.edge, 1.0, "worst_case"), 2) == 149.25

    def test_inclined(self):
        assert round(realized_traversal_time(self.edge, 0.5, "typical"), 2) == 29.85

    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 3.0))
    def test_lognormal_clamped(self, seed, sigma):
        t = realized_traversal_time(self.edge, 1.0, "lognormal", random.Random(seed), sigma)
        assert self.edge.tau_typ <= t <= self.edge.tau_wc
