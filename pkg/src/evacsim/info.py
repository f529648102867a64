"""Information-lag layer: timestamped world snapshots and fresh/stale views.

A decision is served from the current world state with probability ``1 - pod``
and from the snapshot taken at the evacuee's previous decision otherwise.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .errors import ConfigError, MissingSnapshot, NonMonotonicTime

_EMPTY: Mapping[int, int] = MappingProxyType({})


@dataclass(frozen=True)
class Snapshot:
    t: float
    edge_occupancy: Mapping[int, int] = _EMPTY
    node_occupancy: Mapping[int, int] = _EMPTY
    blocked: frozenset[int] = frozenset()
    blocked_version: int = 0
    # evacuees queued to enter each edge
    edge_queue: Mapping[int, int] = _EMPTY

    def edge_load(self, eid: int) -> int:
        """Persons on the edge plus persons waiting to enter it."""
        return self.edge_occupancy.get(eid, 0) + self.edge_queue.get(eid, 0)


@dataclass(frozen=True)
class InformationView:
    snapshot: Snapshot
    stale: bool = False

    @property
    def blocked(self) -> frozenset[int]:
        return self.snapshot.blocked


class SnapshotStore:
    """Snapshots ordered by strictly increasing time."""

    def __init__(self):
        self._times: list[float] = []
        self._snaps: list[Snapshot] = []

    def __len__(self):
        return len(self._snaps)

    def __iter__(self):
        return iter(self._snaps)

    @property
    def latest(self) -> Snapshot | None:
        return self._snaps[-1] if self._snaps else None

    def record(self, snapshot: Snapshot, keep_from: float | None = None) -> SnapshotStore:
        """Append ``snapshot``; drop entries no longer needed to answer lookups at or after ``keep_from``."""
        if self._times and snapshot.t <= self._times[-1]:
            raise NonMonotonicTime(f"snapshot at t={snapshot.t} after t={self._times[-1]}")
        self._times.append(snapshot.t)
        self._snaps.append(snapshot)
        if keep_from is not None:
            self.prune(keep_from)
        return self

    def prune(self, keep_from: float) -> None:
        # keep the newest snapshot at or before keep_from, it answers lookup(keep_from)
        i = bisect.bisect_right(self._times, keep_from) - 1
        if i > 0:
            del self._times[:i]
            del self._snaps[:i]

    def lookup(self, t: float) -> Snapshot:
        i = bisect.bisect_right(self._times, t) - 1
        if i < 0:
            raise MissingSnapshot(f"no snapshot at or before t={t}")
        return self._snaps[i]


def record_snapshot(store: SnapshotStore, snapshot: Snapshot, t: float | None = None, keep_from=None):
    if t is not None and t != snapshot.t:
        snapshot = Snapshot(
            t,
            snapshot.edge_occupancy,
            snapshot.node_occupancy,
            snapshot.blocked,
            snapshot.blocked_version,
            snapshot.edge_queue,
        )
    return store.record(snapshot, keep_from)


@dataclass(frozen=True)
class DelayConfig:
    """Per-node probability of delay, with a scalar default for unlisted nodes."""

    pod: float = 0.0
    per_node: Mapping[int, float] = field(default_factory=dict)
    freeze_per_run: bool = False

    def __post_init__(self):
        for key, p in [("default", self.pod), *self.per_node.items()]:
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"pod for {key} must lie in [0, 1], got {p}")

    def pod_for(self, v: int) -> float:
        return self.per_node.get(v, self.pod)

    def with_pod(self, pod: float) -> DelayConfig:
        """Same config with every node's probability replaced by ``pod``."""
        return DelayConfig(pod, {}, self.freeze_per_run)


def sample_staleness(pod_v: float, rng) -> bool:
    return rng.random() < pod_v


def get_view(store: SnapshotStore, evacuee, decision_time: float, pod_v: float, rng, current: Snapshot | None = None):
    """Serve an evacuee's decision from fresh or one-step-stale information.

    ``current`` is the live world state at ``decision_time``; when omitted the
    store must hold a snapshot stamped exactly at ``decision_time``.
    """
    if sample_staleness(pod_v, rng):
        return InformationView(store.lookup(evacuee.previous_decision_epoch), stale=True)
    if current is None:
        current = store.lookup(decision_time)
        if current.t != decision_time:
            raise MissingSnapshot(f"no snapshot at decision time {decision_time}")
    return InformationView(current, stale=False)
