"""Discrete-event evacuation simulator.

Evacuees sit on nodes or traverse edges. At every node an evacuee asks the
guidance system for a next hop; the answer is computed from a fresh or a
one-step-stale snapshot of the world. Edges admit at most ``capacity``
evacuees at once, later arrivals queue FIFO at the edge entrance.

Event order at equal timestamps follows ``PRIORITY`` then insertion order.
"""

from __future__ import annotations

import hashlib
import heapq
import math
import random
from collections import deque
from dataclasses import dataclass

from .errors import AuditFailure, CapacityExceeded, ConfigError
from .graph import Edge, EvacGraph, NodeKind
from .hazard import HazardState, inclination_multiplier
from .info import InformationView, Snapshot, SnapshotStore, sample_staleness
from .routing import BUDGET_EPS, GO, TRAPPED, cached_distance_maps, next_hop, update_budget
from .scenario import SimConfig, graph_digest

WAITING = "waiting"
MOVING = "moving"
EVACUATED = "evacuated"
MISSED = "deadline_missed_evacuated"
CASUALTY = "casualty"
TRAPPED_STATE = "trapped"
STATES = (WAITING, MOVING, EVACUATED, MISSED, CASUALTY, TRAPPED_STATE)
TERMINAL = frozenset({EVACUATED, MISSED, CASUALTY, TRAPPED_STATE})

HAZARD_UPDATE = "hazard_update"
INCLINATION_UPDATE = "inclination_update"
SNAPSHOT_TICK = "snapshot_tick"
EDGE_EXIT = "edge_exit"
DECISION = "decision"
PRIORITY = {HAZARD_UPDATE: 0, INCLINATION_UPDATE: 1, SNAPSHOT_TICK: 2, EDGE_EXIT: 3, DECISION: 4}

TRACE_COLUMNS = ("t", "kind", "evacuee", "location", "detail")

_PRUNE_EVERY = 128


@dataclass(slots=True)
class Evacuee:
    id: int
    origin: int
    node: int | None
    budget: float = 0.0
    state: str = WAITING
    previous_decision_epoch: float = 0.0
    evac_time: float | None = None
    edge: int | None = None
    target: int | None = None
    queued_edge: int | None = None
    initial_budget: float = 0.0
    decisions: int = 0
    stale_decisions: int = 0
    at_risk_decisions: int = 0


@dataclass(frozen=True)
class EvacueeRecord:
    id: int
    origin: int
    outcome: str
    evac_time: float | None
    initial_budget: float
    final_budget: float
    decisions: int
    stale_decisions: int
    at_risk_decisions: int


@dataclass
class RunResult:
    records: list[EvacueeRecord]
    counts: dict[str, int]
    seed: int
    config_digest: str
    n_events: int = 0
    end_time: float = 0.0
    trace: list[str] | None = None
    trace_hash: str | None = None
    audits: int = 0

    @property
    def completed_times(self) -> list[float]:
        return [r.evac_time for r in self.records if r.outcome in (EVACUATED, MISSED)]

    @property
    def mean_evac_time(self) -> float:
        times = self.completed_times
        return math.fsum(times) / len(times) if times else math.nan

    @property
    def deadline_misses(self) -> int:
        return self.counts[MISSED]


# ---------------------------------------------------------------- placement


def place_evacuees(graph: EvacGraph, policy: str, n: int | None, rng: random.Random, budget: float = 0.0) -> list[Evacuee]:
    """Initial evacuee positions.

    ``all_nodes`` puts one evacuee on every non-exit node (``n`` ignored, id
    order shuffled). ``cabins`` and ``restaurant`` draw ``n`` free capacity
    slots uniformly without replacement; ``split_half`` sends ceil(n/2) to
    cabins and floor(n/2) to the restaurant.
    """
    if policy == "all_nodes":
        origins = [node.id for node in graph.nodes if node.kind != NodeKind.EXIT]
        rng.shuffle(origins)
    elif policy in ("cabins", "restaurant", "split_half"):
        if n is None:
            raise ConfigError(f"placement {policy} needs a passenger count")
        if policy == "split_half":
            plan = [(NodeKind.CABIN, (n + 1) // 2), (NodeKind.RESTAURANT, n // 2)]
        else:
            plan = [(NodeKind.CABIN if policy == "cabins" else NodeKind.RESTAURANT, n)]
        origins = []
        for kind, count in plan:
            slots = [v for v in graph.nodes_of_kind(kind) for _ in range(int(graph.nodes[v].capacity))]
            if count > len(slots):
                raise CapacityExceeded(f"{count} passengers exceed {kind.value} capacity {len(slots)}")
            origins.extend(rng.sample(slots, count))
    else:
        raise ConfigError(f"unknown placement {policy!r}")
    return [Evacuee(i, v, v, budget, initial_budget=budget) for i, v in enumerate(origins)]


def realized_traversal_time(edge: Edge, m: float = 1.0, mode: str = "typical", rng=None, sigma: float = 0.1) -> float:
    """Realised crossing time at inclination multiplier ``m``."""
    if mode == "typical":
        base = edge.tau_typ
    elif mode == "worst_case":
        base = edge.tau_wc
    elif mode == "lognormal":
        base = min(max(edge.tau_typ * math.exp(sigma * rng.gauss(0.0, 1.0)), edge.tau_typ), edge.tau_wc)
    else:
        raise ConfigError(f"unknown traversal mode {mode!r}")
    return base / m


def _rng(seed: int, stream: str) -> random.Random:
    return random.Random(f"{seed}/{stream}")


# ---------------------------------------------------------------- simulation


class Simulation:
    """One run: owns the world state, event queue and snapshot store."""

    def __init__(self, graph: EvacGraph, config: SimConfig, seed: int, evacuees: list[Evacuee] | None = None):
        self.graph = graph
        self.config = config
        self.seed = seed
        self.delay = config.delay
        self.rng_jitter = _rng(seed, "jitter")
        self.rng_stale = _rng(seed, "staleness")
        if evacuees is None:
            evacuees = place_evacuees(graph, config.placement, config.passengers, _rng(seed, "placement"), config.deadline.t_d)
        self.evacuees = evacuees
        self.total = len(evacuees)

        if any(f.origin == graph.exit for f in config.hazard):
            raise ConfigError("a hazard front starts at the exit")
        self.hazard = HazardState.build(graph, config.hazard) if config.hazard else HazardState.empty(graph)
        if self.hazard.reach_time[graph.exit] < math.inf:
            # the exit must stay reachable for routing to be defined
            raise ConfigError("hazard reaches the exit node")

        self.t = 0.0
        self.blocked: frozenset[int] = frozenset()
        self.blocked_version = 0
        self.m = inclination_multiplier(config.inclination, 0.0)

        self.node_occ: dict[int, int] = {}
        self.edge_occ: dict[int, int] = {}
        self.queue_len: dict[int, int] = {}
        self.queues: dict[int, deque] = {}
        self.node_total = 0
        self.edge_total = 0
        self.queued_total = 0
        self.n_state = dict.fromkeys(STATES, 0)
        self._dirty = True
        self._live: Snapshot | None = None

        self.store = SnapshotStore()
        self._since_prune = 0
        self.frozen_stale: dict[int, bool] | None = None
        if self.delay.freeze_per_run:
            self.frozen_stale = {v: sample_staleness(self.delay.pod_for(v), self.rng_stale) for v in range(graph.n_nodes)}

        self._heap: list = []
        self._seq = 0
        self.n_events = 0
        self.audits = 0
        self.trace: list[str] | None = [] if config.trace else None

        for e in evacuees:
            if e.state != WAITING or e.node is None:
                raise ConfigError(f"evacuee {e.id} must start waiting on a node")
            if e.node == graph.exit:
                raise ConfigError(f"evacuee {e.id} starts on the exit")
            self._inc(self.node_occ, e.node)
            self.node_total += 1
            self.n_state[WAITING] += 1

    # -- bookkeeping helpers

    @staticmethod
    def _inc(d: dict, k: int) -> None:
        d[k] = d.get(k, 0) + 1

    @staticmethod
    def _dec(d: dict, k: int) -> None:
        c = d[k] - 1
        if c:
            d[k] = c
        else:
            del d[k]

    def _set_state(self, e: Evacuee, state: str) -> None:
        self.n_state[e.state] -= 1
        self.n_state[state] += 1
        e.state = state

    def _push(self, t: float, kind: str, a=None, b=None) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (t, PRIORITY[kind], self._seq, kind, a, b))

    def _log(self, kind: str, who, where, detail="") -> None:
        self.trace.append(f"{self.t!r},{kind},{'' if who is None else who},{'' if where is None else where},{detail}")

    def snapshot(self) -> Snapshot:
        """Current true world state (cached until something changes)."""
        live = self._live
        if self._dirty or live is None or live.t != self.t:
            if self._dirty or live is None:
                live = Snapshot(
                    self.t, dict(self.edge_occ), dict(self.node_occ), self.blocked, self.blocked_version, dict(self.queue_len)
                )
            else:
                live = Snapshot(self.t, live.edge_occupancy, live.node_occupancy, live.blocked, live.blocked_version, live.edge_queue)
            self._live = live
            self._dirty = False
        return live

    def _record(self, snap: Snapshot) -> None:
        latest = self.store.latest
        if latest is not None and latest.t >= snap.t:
            return
        self._since_prune += 1
        keep_from = None
        if self._since_prune >= _PRUNE_EVERY:
            self._since_prune = 0
            live = [e.previous_decision_epoch for e in self.evacuees if e.state not in TERMINAL]
            keep_from = min(live) if live else snap.t
        self.store.record(snap, keep_from)

    # -- main loop

    def run(self) -> RunResult:
        cfg = self.config
        for t in self.hazard.change_times:
            self._push(t, HAZARD_UPDATE)
        if cfg.inclination is not None:
            for start, _ in cfg.inclination.intervals[1:]:
                self._push(start, INCLINATION_UPDATE)
        self._record(self.snapshot())
        for e in self.evacuees:
            self._push(0.0, DECISION, e)

        cap = cfg.cap
        audit_level = cfg.audit
        heap = self._heap
        while heap:
            if heap[0][0] > cap:
                break
            t, _, _, kind, a, b = heapq.heappop(heap)
            self.t = t
            self.n_events += 1
            if kind == DECISION:
                self._decide(a)
            elif kind == EDGE_EXIT:
                self._edge_exit(a, b)
            elif kind == HAZARD_UPDATE:
                self._hazard_update()
            elif kind == INCLINATION_UPDATE:
                self.m = inclination_multiplier(cfg.inclination, t)
                if self.trace is not None:
                    self._log(INCLINATION_UPDATE, None, None, f"m={self.m!r}")
            if audit_level:
                audit(self, full=audit_level >= 2)

        for e in self.evacuees:
            if e.state not in TERMINAL:
                self._leave_position(e)
                self._set_state(e, TRAPPED_STATE)
                if self.trace is not None:
                    self._log("time_cap", e.id, e.node if e.node is not None else f"e{e.edge}", "trapped")
        if audit_level:
            audit(self, full=True)
        return self._result()

    def _leave_position(self, e: Evacuee) -> None:
        if e.state == MOVING:
            self._dec(self.edge_occ, e.edge)
            self.edge_total -= 1
        elif e.state == WAITING:
            if e.queued_edge is not None:
                self._unqueue(e)
            self._dec(self.node_occ, e.node)
            self.node_total -= 1
        self._dirty = True

    def _unqueue(self, e: Evacuee) -> None:
        q = self.queues[e.queued_edge]
        q.remove(e)
        self._dec(self.queue_len, e.queued_edge)
        self.queued_total -= 1
        e.queued_edge = None

    # -- transitions

    def _decide(self, e: Evacuee) -> None:
        if e.state != WAITING or e.queued_edge is not None:
            return
        cfg = self.config
        t = self.t
        v = e.node
        e.budget = update_budget(e.budget, t - e.previous_decision_epoch)

        live = self.snapshot()
        self._record(live)
        if cfg.bypass_delay:
            view = InformationView(live, False)
        else:
            if self.frozen_stale is not None:
                stale = self.frozen_stale[v]
            else:
                stale = sample_staleness(self.delay.pod_for(v), self.rng_stale)
            if stale:
                view = InformationView(self.store.lookup(e.previous_decision_epoch), True)
                e.stale_decisions += 1
            else:
                view = InformationView(live, False)
        e.previous_decision_epoch = t
        e.decisions += 1

        snap = view.snapshot
        maps = cached_distance_maps(self.graph, snap.blocked, snap.blocked_version)
        wc_scale = 1.0 / self.m if cfg.strict_worst_case else 1.0
        rec = next_hop(self.graph, maps, v, e.budget, view, congestion=cfg.congestion_aware, wc_scale=wc_scale)
        if rec.deadline_at_risk:
            e.at_risk_decisions += 1
        if self.trace is not None:
            tag = f"{rec.verdict}:{rec.next}" if rec.verdict == GO else rec.verdict
            self._log(DECISION, e.id, v, f"{tag} stale={int(view.stale)} risk={int(rec.deadline_at_risk)} budget={e.budget!r}")

        if rec.verdict == TRAPPED:
            self._leave_position(e)
            self._set_state(e, TRAPPED_STATE)
            return
        if rec.next in self.blocked:
            # stale guidance pointed into the hazard; found out at the door
            if self.trace is not None:
                self._log("blocked", e.id, v, f"wait:{rec.next}")
            self._push(t + cfg.wait_quantum, DECISION, e)
            return
        e.target = rec.next
        self._try_enter(e, rec.edge)

    def _try_enter(self, e: Evacuee, eid: int) -> None:
        edge = self.graph.edges[eid]
        if self.edge_occ.get(eid, 0) < edge.capacity and not self.queue_len.get(eid):
            self._enter(e, eid)
        else:
            q = self.queues.get(eid)
            if q is None:
                q = self.queues[eid] = deque()
            q.append(e)
            e.queued_edge = eid
            self._inc(self.queue_len, eid)
            self.queued_total += 1
            self._dirty = True
            if self.trace is not None:
                self._log("queue", e.id, e.node, f"e{eid}")

    def _enter(self, e: Evacuee, eid: int) -> None:
        cfg = self.config
        edge = self.graph.edges[eid]
        self._dec(self.node_occ, e.node)
        self.node_total -= 1
        self._inc(self.edge_occ, eid)
        self.edge_total += 1
        self._set_state(e, MOVING)
        e.edge = eid
        e.node = None
        self._dirty = True
        dt = realized_traversal_time(edge, self.m, cfg.traversal_mode, self.rng_jitter, cfg.jitter_sigma)
        self._push(self.t + dt, EDGE_EXIT, e, eid)
        if self.trace is not None:
            self._log("enter", e.id, f"e{eid}", f"to={e.target} dt={dt!r}")

    def _edge_exit(self, e: Evacuee, eid: int) -> None:
        if e.state != MOVING:
            return
        t = self.t
        u = e.target
        self._dec(self.edge_occ, eid)
        self.edge_total -= 1
        self._dirty = True
        e.edge = None
        e.target = None
        if u == self.graph.exit:
            e.budget = update_budget(e.budget, t - e.previous_decision_epoch)
            e.previous_decision_epoch = t
            e.evac_time = t
            self._set_state(e, MISSED if e.budget < -BUDGET_EPS else EVACUATED)
            if self.trace is not None:
                self._log(EDGE_EXIT, e.id, u, f"{e.state} budget={e.budget!r}")
        else:
            e.node = u
            self._inc(self.node_occ, u)
            self.node_total += 1
            self._set_state(e, WAITING)
            if self.trace is not None:
                self._log(EDGE_EXIT, e.id, u, f"e{eid}")
            self._push(t, DECISION, e)
        self._admit(eid)

    def _admit(self, eid: int) -> None:
        q = self.queues.get(eid)
        cap = self.graph.edges[eid].capacity
        while q and self.edge_occ.get(eid, 0) < cap:
            nxt = q.popleft()
            self._dec(self.queue_len, eid)
            self.queued_total -= 1
            nxt.queued_edge = None
            self._dirty = True
            if nxt.target in self.blocked:
                nxt.target = None
                self._push(self.t, DECISION, nxt)
                continue
            self._enter(nxt, eid)

    def _hazard_update(self) -> None:
        t = self.t
        newly = frozenset(v for v, r in enumerate(self.hazard.reach_time) if r <= t) - self.blocked
        if not newly:
            return
        self.blocked = self.blocked | newly
        self.blocked_version += 1
        self._dirty = True
        if self.trace is not None:
            self._log(HAZARD_UPDATE, None, None, "blocked=" + " ".join(map(str, sorted(newly))))
        freed = set()
        for e in self.evacuees:
            if e.state == WAITING and e.node in newly:
                if e.queued_edge is not None:
                    freed.add(e.queued_edge)
                self._leave_position(e)
                self._set_state(e, CASUALTY)
                if self.trace is not None:
                    self._log("casualty", e.id, e.node)
        for eid in sorted(freed):
            self._admit(eid)

    def _result(self) -> RunResult:
        records = [
            EvacueeRecord(
                e.id,
                e.origin,
                e.state,
                e.evac_time,
                e.initial_budget,
                e.budget,
                e.decisions,
                e.stale_decisions,
                e.at_risk_decisions,
            )
            for e in self.evacuees
        ]
        digest = hashlib.sha256(f"{graph_digest(self.graph)}/{self.config.digest()}".encode()).hexdigest()[:16]
        trace_hash = None
        if self.trace is not None:
            trace_hash = hashlib.sha256("\n".join(self.trace).encode()).hexdigest()
        return RunResult(
            records, dict(self.n_state), self.seed, digest, self.n_events, self.t, self.trace, trace_hash, self.audits
        )


def audit(sim: Simulation, full: bool = True) -> dict[str, int]:
    """Conservation check; raises AuditFailure on any inconsistency."""
    sim.audits += 1
    counts = sim.n_state
    problems = []
    if sum(counts.values()) != sim.total:
        problems.append(f"state counts {counts} do not sum to {sim.total}")
    if sim.node_total != counts[WAITING]:
        problems.append(f"node occupancy {sim.node_total} != waiting {counts[WAITING]}")
    if sim.edge_total != counts[MOVING]:
        problems.append(f"edge occupancy {sim.edge_total} != moving {counts[MOVING]}")
    if full:
        recount = dict.fromkeys(STATES, 0)
        nodes: dict[int, int] = {}
        edges: dict[int, int] = {}
        queued: dict[int, int] = {}
        for e in sim.evacuees:
            recount[e.state] += 1
            if e.state == WAITING:
                nodes[e.node] = nodes.get(e.node, 0) + 1
                if e.queued_edge is not None:
                    queued[e.queued_edge] = queued.get(e.queued_edge, 0) + 1
            elif e.state == MOVING:
                edges[e.edge] = edges.get(e.edge, 0) + 1
            if (e.evac_time is not None) != (e.state in (EVACUATED, MISSED)):
                problems.append(f"evacuee {e.id} evac_time inconsistent with state {e.state}")
        if recount != counts:
            problems.append(f"state counters {counts} != recount {recount}")
        if nodes != sim.node_occ:
            problems.append("node occupancy map disagrees with evacuee locations")
        if edges != sim.edge_occ:
            problems.append("edge occupancy map disagrees with evacuee locations")
        if queued != sim.queue_len or {k: len(q) for k, q in sim.queues.items() if q} != queued:
            problems.append("edge queues disagree with queued evacuees")
        if sum(nodes.values()) + sum(edges.values()) + recount[EVACUATED] + recount[MISSED] + recount[CASUALTY] + recount[TRAPPED_STATE] != sim.total:
            problems.append("occupancies plus terminal outcomes do not sum to total")
        for eid, c in sim.edge_occ.items():
            if c > sim.graph.edges[eid].capacity:
                problems.append(f"edge {eid} holds {c} > capacity {sim.graph.edges[eid].capacity}")
    if problems:
        raise AuditFailure("; ".join(problems))
    return {"total": sim.total, **counts}


def run(graph: EvacGraph, config: SimConfig, seed: int, evacuees: list[Evacuee] | None = None) -> RunResult:
    """Simulate one evacuation; deterministic in (graph, config, seed)."""
    return Simulation(graph, config, seed, evacuees).run()
