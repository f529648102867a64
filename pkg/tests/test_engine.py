from __future__ import annotations

import math
import random

import pytest

import evacsim.engine as engine
from conftest import A, B, C, X, make_g1
from evacsim.engine import (
    CASUALTY,
    EVACUATED,
    MISSED,
    TRAPPED_STATE,
    Evacuee,
    Simulation,
    audit,
    place_evacuees,
    run,
)
from evacsim.errors import AuditFailure, CapacityExceeded, ConfigError
from evacsim.graph import EdgeKind, Node, NodeKind, build_graph
from evacsim.hazard import HazardFront, InclinationSchedule
from evacsim.info import DelayConfig
from evacsim.layout import generate_layout
from evacsim.scenario import SimConfig

TYPICAL = SimConfig(traversal_mode="typical", audit=2)


def at(*origins, budget=1800.0):
    return [Evacuee(i, v, v, budget, initial_budget=budget) for i, v in enumerate(origins)]


def g1_with_lead_in():
    """G1 plus node S=4 hanging off A by 10 m."""
    g = make_g1()
    nodes = list(g.nodes) + [Node(4, NodeKind.CABIN, 2, 2)]
    edges = [(e.a, e.b, e.kind, e.length, None) for e in g.edges] + [(4, A, EdgeKind.PASSAGEWAY, 10.0, None)]
    return build_graph(nodes, edges)


class TestSingleEvacuee:
    def test_g1_hand_value(self, g1):
        res = run(g1, TYPICAL, 0, at(A))
        assert res.counts[EVACUATED] == 1
        assert round(res.records[0].evac_time, 2) == 29.85

    def test_budget_tracks_elapsed(self, g1):
        res = run(g1, TYPICAL, 0, at(A))
        rec = res.records[0]
        assert rec.final_budget == pytest.approx(rec.initial_budget - rec.evac_time, abs=1e-9)

    def test_inclination_doubles_time(self, g1):
        cfg = TYPICAL.replace(inclination=InclinationSchedule(((0.0, 20.0),)))
        assert round(run(g1, cfg, 0, at(A)).records[0].evac_time, 2) == 59.70

    def test_inclination_change_midway(self, g1):
        # first edge at m=1, second started after the 10 s tilt at m=0.5
        cfg = TYPICAL.replace(inclination=InclinationSchedule(((0.0, 0.0), (10.0, 20.0))))
        t = run(g1, cfg, 0, at(A)).records[0].evac_time
        assert t == pytest.approx(g1.edges[0].tau_typ + 2 * g1.edges[1].tau_typ)

    def test_deadline_miss_recorded(self, g1):
        res = run(g1, TYPICAL, 0, at(A, budget=20.0))
        assert res.records[0].outcome == MISSED
        assert res.deadline_misses == 1
        assert res.mean_evac_time == pytest.approx(29.85, abs=0.01)


class TestQueueing:
    def test_fifo_capacity_two(self):
        nodes = [Node(0, NodeKind.CABIN, 2, 2), Node(1, NodeKind.EXIT, 2, math.inf)]
        g = build_graph(nodes, [(0, 1, EdgeKind.PASSAGEWAY, 10.0, 2)])
        res = run(g, TYPICAL.replace(trace=True), 0, at(0, 0, 0))
        times = sorted(r.evac_time for r in res.records)
        tau = g.edges[0].tau_typ
        assert times[0] == times[1] == pytest.approx(tau)
        assert times[2] == pytest.approx(2 * tau)
        assert sum(1 for line in res.trace if ",queue," in line) == 1

    def test_capacity_never_exceeded(self):
        g = generate_layout(1, 6, 0, 3)
        res = run(g, SimConfig(audit=2, placement="cabins", passengers=12), 4)
        assert res.counts[EVACUATED] + res.counts[MISSED] == 12


class TestHazard:
    def test_stale_view_discovers_block(self):
        g = g1_with_lead_in()
        cfg = TYPICAL.replace(hazard=(HazardFront(B, 5.0, 0.0),), delay=DelayConfig(1.0), trace=True)
        res = run(g, cfg, 0, at(4))
        tau = {e.id: e.tau_typ for e in g.edges}
        assert res.records[0].evac_time == pytest.approx(tau[4] + 5.0 + tau[2] + tau[3])
        assert any(",blocked," in line and "wait:1" in line for line in res.trace)

    def test_fresh_view_avoids_block(self):
        g = g1_with_lead_in()
        cfg = TYPICAL.replace(hazard=(HazardFront(B, 5.0, 0.0),))
        tau = {e.id: e.tau_typ for e in g.edges}
        assert run(g, cfg, 0, at(4)).records[0].evac_time == pytest.approx(tau[4] + tau[2] + tau[3])

    def test_casualty_on_blocked_node(self, g1):
        res = run(g1, TYPICAL.replace(hazard=(HazardFront(C, 0.0, 0.0),)), 0, at(A, C))
        assert res.records[1].outcome == CASUALTY
        assert res.records[0].outcome == EVACUATED
        assert res.mean_evac_time == pytest.approx(29.85, abs=0.01)

    def test_trapped_when_boxed_in(self, g1):
        cfg = TYPICAL.replace(hazard=(HazardFront(B, 0.0, 0.0), HazardFront(C, 0.0, 0.0)))
        res = run(g1, cfg, 0, at(A))
        assert res.records[0].outcome == TRAPPED_STATE
        assert math.isnan(res.mean_evac_time)

    def test_traversal_completes_then_leaves(self):
        # B is blocked at 20 s while the evacuee is on A-B; it finishes the edge and moves on
        g = g1_with_lead_in()
        res = run(g, TYPICAL.replace(hazard=(HazardFront(B, 20.0, 0.0),), trace=True), 0, at(4))
        assert res.records[0].outcome == EVACUATED
        assert res.records[0].evac_time == pytest.approx(g.edges[4].tau_typ + 29.8507462, abs=1e-6)
        assert any(line.split(",")[1:4] == ["decision", "0", str(B)] for line in res.trace)

    def test_hazard_at_exit_rejected(self, g1):
        with pytest.raises(ConfigError):
            run(g1, TYPICAL.replace(hazard=(HazardFront(X, 0.0, 0.0),)), 0, at(A))
        with pytest.raises(ConfigError):
            run(g1, TYPICAL.replace(hazard=(HazardFront(B, 0.0, 1.0),)), 0, at(A))


class TestRunLifecycle:
    def test_zero_evacuees(self, g1):
        res = run(g1, TYPICAL, 0, [])
        assert res.records == [] and res.n_events == 0
        assert sum(res.counts.values()) == 0

    def test_time_cap_traps(self, g1):
        res = run(g1, TYPICAL.replace(time_cap=5.0), 0, at(A))
        assert res.records[0].outcome == TRAPPED_STATE

    def test_default_cap(self):
        assert SimConfig().cap == 4 * 1800.0

    def test_counts_sum(self):
        g = generate_layout()
        res = run(g, SimConfig(), 3)
        assert sum(res.counts.values()) == g.n_nodes - 1
        assert res.audits > 0

    def test_replay_identical(self):
        g = generate_layout()
        cfg = SimConfig(trace=True).with_pod(0.5)
        a, b = run(g, cfg, 11), run(g, cfg, 11)
        assert a.trace_hash == b.trace_hash and a.records == b.records

    def test_pod_zero_equals_bypass(self):
        g = generate_layout()
        cfg = SimConfig(trace=True, placement="split_half", passengers=120)
        assert run(g, cfg, 5).trace == run(g, cfg.replace(bypass_delay=True), 5).trace

    def test_freeze_per_run(self):
        g = generate_layout(1, 8, 0, 2)
        cfg = SimConfig(delay=DelayConfig(0.5, {}, freeze_per_run=True), placement="cabins", passengers=10)
        res = run(g, cfg, 1)
        assert res.counts[EVACUATED] == 10

    def test_bad_start(self, g1):
        with pytest.raises(ConfigError):
            run(g1, TYPICAL, 0, at(X))

    def test_strict_worst_case_scaling(self, g1):
        cfg = TYPICAL.replace(inclination=InclinationSchedule(((0.0, 20.0),)), strict_worst_case=True)
        # with m=0.5 the worst-case bound via B doubles to 597 s > 400
        res = run(g1, cfg, 0, at(A, budget=400.0))
        assert res.records[0].at_risk_decisions >= 1


class TestStaleViewsInEngine:
    def test_stale_views_are_recorded_snapshots(self, monkeypatch):
        recorded, served = [], []
        real_record, real_next_hop = engine.SnapshotStore.record, engine.next_hop

        def spy_record(self, snapshot, keep_from=None):
            recorded.append(snapshot)
            return real_record(self, snapshot, keep_from)

        def spy_next_hop(graph, maps, v, budget, view=None, **kw):
            served.append(view)
            return real_next_hop(graph, maps, v, budget, view, **kw)

        monkeypatch.setattr(engine.SnapshotStore, "record", spy_record)
        monkeypatch.setattr(engine, "next_hop", spy_next_hop)
        g = generate_layout(2, None, 2, 0, target_nodes=120)
        run(g, SimConfig(placement="cabins", passengers=60).with_pod(0.6), 2)
        stale = [v for v in served if v.stale]
        assert stale
        ids = {id(s) for s in recorded}
        assert all(id(v.snapshot) in ids for v in stale)

    def test_static_world_pod_one_matches_pod_zero(self, g1):
        for origin in (A, B, C):
            fresh = run(g1, TYPICAL, 0, at(origin))
            stale = run(g1, TYPICAL.replace(delay=DelayConfig(1.0)), 0, at(origin))
            assert fresh.records[0].evac_time == stale.records[0].evac_time


class TestPlacement:
    def test_all_nodes(self):
        g = generate_layout()
        evs = place_evacuees(g, "all_nodes", None, random.Random(0), 1800.0)
        assert len(evs) == 345
        assert sorted(e.origin for e in evs) == [v for v in range(g.n_nodes) if v != g.exit]

    def test_cabins_saturated(self):
        g = generate_layout()
        cabins = g.nodes_of_kind(NodeKind.CABIN)
        evs = place_evacuees(g, "cabins", 2 * len(cabins), random.Random(1))
        counts = {}
        for e in evs:
            counts[e.origin] = counts.get(e.origin, 0) + 1
        assert counts == {c: 2 for c in cabins}

    def test_split_half(self):
        g = generate_layout()
        evs = place_evacuees(g, "split_half", 101, random.Random(2))
        kinds = [g.nodes[e.origin].kind for e in evs]
        assert kinds.count(NodeKind.CABIN) == 51 and kinds.count(NodeKind.RESTAURANT) == 50

    def test_over_capacity(self):
        g = generate_layout()
        with pytest.raises(CapacityExceeded):
            place_evacuees(g, "restaurant", 10 * 24 + 1, random.Random(0))

    def test_needs_count(self):
        with pytest.raises(ConfigError):
            place_evacuees(generate_layout(), "cabins", None, random.Random(0))


class TestAudit:
    def test_legal_state_passes(self, g1):
        sim = Simulation(g1, TYPICAL, 0, at(A, B))
        assert audit(sim)["total"] == 2

    def test_double_count_detected(self, g1):
        sim = Simulation(g1, TYPICAL, 0, at(A, B))
        sim.n_state[engine.WAITING] += 1
        with pytest.raises(AuditFailure):
            audit(sim, full=False)

    def test_occupancy_mismatch_detected(self, g1):
        sim = Simulation(g1, TYPICAL, 0, at(A, B))
        sim.node_occ[A] += 1
        with pytest.raises(AuditFailure):
            audit(sim)

    def test_post_run_totals(self):
        g = generate_layout()
        res = run(g, SimConfig(audit=2, placement="split_half", passengers=80), 9)
        assert sum(res.counts.values()) == 80
