"""Scenario files (JSON) and the simulation config they carry."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError, InvalidSpeed, ParseError, ValidationError
from .graph import (
    DEFAULT_NODE_CAPACITY,
    DeadlineBudget,
    EdgeKind,
    EvacGraph,
    Node,
    NodeKind,
    Speeds,
    build_graph,
    compute_deadline,
    validate,
)
from .hazard import HazardFront, InclinationSchedule
from .info import DelayConfig

PLACEMENTS = ("all_nodes", "cabins", "restaurant", "split_half")
PLACEMENT_ALIASES = {"all": "all_nodes", "split": "split_half"}
TRAVERSAL_MODES = ("typical", "lognormal", "worst_case")

DEFAULT_DEADLINE = (3600.0, 300.0, 1500.0)


@dataclass(frozen=True)
class SimConfig:
    deadline: DeadlineBudget = field(default_factory=lambda: compute_deadline(*DEFAULT_DEADLINE))
    hazard: tuple[HazardFront, ...] = ()
    inclination: InclinationSchedule | None = None
    delay: DelayConfig = field(default_factory=DelayConfig)
    placement: str = "all_nodes"
    passengers: int | None = None
    traversal_mode: str = "lognormal"
    jitter_sigma: float = 0.1
    wait_quantum: float = 5.0
    time_cap: float | None = None  # None: 4 x T_D
    congestion_aware: bool = True
    strict_worst_case: bool = False
    bypass_delay: bool = False
    # 0 off, 1 counter conservation each event plus a full recount at the end, 2 full recount each event
    audit: int = 1
    trace: bool = False  # keep trace lines (the trace hash is always computed when True)
    name: str = ""

    def __post_init__(self):
        if self.placement not in PLACEMENTS:
            raise ConfigError(f"unknown placement {self.placement!r}")
        if self.traversal_mode not in TRAVERSAL_MODES:
            raise ConfigError(f"unknown traversal mode {self.traversal_mode!r}")
        if self.passengers is not None and self.passengers < 0:
            raise ConfigError("passengers must be >= 0")
        if self.wait_quantum <= 0:
            raise ConfigError("wait_quantum must be positive")
        if self.jitter_sigma < 0:
            raise ConfigError("jitter_sigma must be >= 0")
        if self.time_cap is not None and self.time_cap < 0:
            raise ConfigError("time_cap must be >= 0")

    @property
    def cap(self) -> float:
        return 4.0 * self.deadline.t_d if self.time_cap is None else self.time_cap

    def replace(self, **changes) -> SimConfig:
        return dataclasses.replace(self, **changes)

    def with_pod(self, pod: float) -> SimConfig:
        return dataclasses.replace(self, delay=self.delay.with_pod(pod))

    def digest(self) -> str:
        blob = json.dumps(_plain(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (list, tuple, frozenset, set)):
        items = [_plain(x) for x in obj]
        return sorted(items, key=str) if isinstance(obj, (set, frozenset)) else items
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    return obj


def graph_digest(graph: EvacGraph) -> str:
    h = hashlib.sha256()
    for n in graph.nodes:
        h.update(f"{n.id},{n.kind.value},{n.deck},{n.capacity};".encode())
    for e in graph.edges:
        h.update(f"{e.id},{e.a},{e.b},{e.kind.value},{e.length!r},{e.capacity};".encode())
    h.update(f"{graph.exit},{graph.speeds.typical_mps!r},{graph.speeds.worst_case_mps!r}".encode())
    return h.hexdigest()[:16]


# ---------------------------------------------------------------- parsing

_TOP_KEYS = {"meta", "speeds", "deadline", "nodes", "edges", "hazard", "inclination", "delay", "placement", "sim"}
_REQUIRED = {"speeds", "nodes", "edges"}
_SIM_KEYS = {
    "traversal_mode",
    "jitter_sigma",
    "wait_quantum_s",
    "time_cap_s",
    "congestion_aware",
    "strict_worst_case",
}


def _keys(obj: Any, allowed: set[str], where: str, required: set[str] = frozenset()) -> dict:
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ParseError(f"{where}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        raise ParseError(f"{where}: missing keys {sorted(missing)}")
    return obj


def _num(x: Any, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(f"{where}: expected a number, got {x!r}")
    return float(x)


def _int(x: Any, where: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ParseError(f"{where}: expected an integer, got {x!r}")
    return x


def parse_scenario(doc: Any) -> tuple[EvacGraph, SimConfig]:
    """Build (graph, config) from a decoded scenario document; raises ParseError/ValidationError."""
    _keys(doc, _TOP_KEYS, "scenario", _REQUIRED)
    meta = _keys(doc.get("meta", {}), {"name", "seed"}, "meta")

    sp = _keys(doc["speeds"], {"typical_mps", "worst_case_mps"}, "speeds", {"typical_mps", "worst_case_mps"})
    speeds = Speeds(_num(sp["typical_mps"], "speeds.typical_mps"), _num(sp["worst_case_mps"], "speeds.worst_case_mps"))

    if not isinstance(doc["nodes"], list) or not isinstance(doc["edges"], list):
        raise ParseError("nodes and edges must be lists")
    nodes = []
    for i, raw in enumerate(doc["nodes"]):
        _keys(raw, {"id", "kind", "deck", "capacity", "x", "y"}, f"nodes[{i}]", {"id", "kind", "deck"})
        try:
            kind = NodeKind(raw["kind"])
        except ValueError:
            raise ParseError(f"nodes[{i}]: unknown kind {raw['kind']!r}") from None
        if "capacity" in raw:
            cap = _num(raw["capacity"], f"nodes[{i}].capacity")
        else:
            cap = math.inf if kind == NodeKind.EXIT else DEFAULT_NODE_CAPACITY[kind]
        pos = None
        if "x" in raw or "y" in raw:
            pos = (_num(raw.get("x", 0.0), f"nodes[{i}].x"), _num(raw.get("y", 0.0), f"nodes[{i}].y"))
        nodes.append(Node(_int(raw["id"], f"nodes[{i}].id"), kind, _int(raw["deck"], f"nodes[{i}].deck"), cap, pos))
    nodes.sort(key=lambda n: n.id)
    if [n.id for n in nodes] != list(range(len(nodes))):
        raise ValidationError("node ids must be dense from 0 and unique")

    raw_edges = []
    for i, raw in enumerate(doc["edges"]):
        _keys(raw, {"id", "a", "b", "kind", "length_m", "capacity"}, f"edges[{i}]", {"id", "a", "b", "kind", "length_m"})
        try:
            kind = EdgeKind(raw["kind"])
        except ValueError:
            raise ParseError(f"edges[{i}]: unknown kind {raw['kind']!r}") from None
        cap = _int(raw["capacity"], f"edges[{i}].capacity") if "capacity" in raw else None
        length = _num(raw["length_m"], f"edges[{i}].length_m")
        if not length > 0:
            raise ValidationError(f"edge {raw['id']} length {length} <= 0")
        a, b = _int(raw["a"], f"edges[{i}].a"), _int(raw["b"], f"edges[{i}].b")
        if not (0 <= a < len(nodes) and 0 <= b < len(nodes)):
            raise ValidationError(f"edge {raw['id']} references unknown node")
        raw_edges.append((_int(raw["id"], f"edges[{i}].id"), (a, b, kind, length, cap)))
    raw_edges.sort(key=lambda p: p[0])
    if [eid for eid, _ in raw_edges] != list(range(len(raw_edges))):
        raise ValidationError("edge ids must be dense from 0 and unique")
    try:
        graph = build_graph(nodes, [spec for _, spec in raw_edges], speeds)
    except InvalidSpeed as exc:
        raise ValidationError(str(exc)) from None
    problems = validate(graph)
    if problems:
        raise ValidationError(problems)

    config = parse_config(doc, graph)
    if meta.get("name"):
        config = config.replace(name=str(meta["name"]))
    return graph, config


def parse_config(doc: dict, graph: EvacGraph) -> SimConfig:
    kwargs: dict[str, Any] = {}
    if "deadline" in doc:
        dl = _keys(doc["deadline"], {"t_s_s", "t_a_s", "t_el_s"}, "deadline", {"t_s_s", "t_a_s", "t_el_s"})
        try:
            kwargs["deadline"] = compute_deadline(
                _num(dl["t_s_s"], "deadline.t_s_s"), _num(dl["t_a_s"], "deadline.t_a_s"), _num(dl["t_el_s"], "deadline.t_el_s")
            )
        except Exception as exc:
            raise ValidationError(str(exc)) from None

    n = graph.n_nodes
    if "hazard" in doc:
        hz = _keys(doc["hazard"], {"fronts"}, "hazard")
        fronts = []
        for i, f in enumerate(hz.get("fronts", [])):
            _keys(f, {"origin", "onset_s", "speed_mps", "edges"}, f"hazard.fronts[{i}]", {"origin"})
            origin = _int(f["origin"], f"hazard.fronts[{i}].origin")
            if not 0 <= origin < n:
                raise ValidationError(f"hazard front {i} origin {origin} is not a node")
            if origin == graph.exit:
                raise ValidationError(f"hazard front {i} starts at the exit")
            edges = frozenset(f["edges"]) if "edges" in f else None
            try:
                fronts.append(
                    HazardFront(origin, _num(f.get("onset_s", 0.0), "onset_s"), _num(f.get("speed_mps", 0.0), "speed_mps"), edges)
                )
            except ValueError as exc:
                raise ValidationError(str(exc)) from None
        kwargs["hazard"] = tuple(fronts)

    if "inclination" in doc:
        inc = _keys(
            doc["inclination"], {"theta_max_deg", "floor", "intervals", "period_s", "angles"}, "inclination"
        )
        theta_max = _num(inc.get("theta_max_deg", 40.0), "inclination.theta_max_deg")
        floor = _num(inc.get("floor", 0.1), "inclination.floor")
        try:
            if "period_s" in inc:
                kwargs["inclination"] = InclinationSchedule.periodic(
                    _num(inc["period_s"], "inclination.period_s"), inc.get("angles", []), theta_max, floor
                )
            else:
                intervals = []
                for i, iv in enumerate(inc.get("intervals", [])):
                    _keys(iv, {"start_s", "angle_deg"}, f"inclination.intervals[{i}]", {"start_s", "angle_deg"})
                    intervals.append((_num(iv["start_s"], "start_s"), _num(iv["angle_deg"], "angle_deg")))
                kwargs["inclination"] = InclinationSchedule(tuple(intervals), theta_max, floor)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None

    if "delay" in doc:
        dl = _keys(doc["delay"], {"pod", "pod_per_node", "freeze_per_run"}, "delay")
        pod = dl.get("pod", 0.0)
        per_node: dict[int, float] = {}
        if isinstance(pod, dict):
            # per-node map given under "pod"
            per_node_raw, pod = pod, pod.get("default", 0.0)
        else:
            per_node_raw = dl.get("pod_per_node", {})
        if not isinstance(per_node_raw, dict):
            raise ParseError("delay.pod_per_node must be an object")
        for key, val in per_node_raw.items():
            if key == "default":
                pod = val
                continue
            try:
                v = int(key)
            except ValueError:
                raise ParseError(f"delay: bad node key {key!r}") from None
            if not 0 <= v < n:
                raise ValidationError(f"delay: node {v} does not exist")
            per_node[v] = _num(val, f"delay[{key}]")
        try:
            kwargs["delay"] = DelayConfig(_num(pod, "delay.pod"), per_node, bool(dl.get("freeze_per_run", False)))
        except ConfigError as exc:
            raise ValidationError(str(exc)) from None

    if "placement" in doc:
        pl = _keys(doc["placement"], {"policy", "passengers"}, "placement", {"policy"})
        policy = PLACEMENT_ALIASES.get(pl["policy"], pl["policy"])
        if policy not in PLACEMENTS:
            raise ValidationError(f"placement: unknown policy {pl['policy']!r}")
        kwargs["placement"] = policy
        if pl.get("passengers") is not None:
            kwargs["passengers"] = _int(pl["passengers"], "placement.passengers")

    if "sim" in doc:
        sim = _keys(doc["sim"], _SIM_KEYS, "sim")
        renames = {"wait_quantum_s": "wait_quantum", "time_cap_s": "time_cap"}
        for key, val in sim.items():
            kwargs[renames.get(key, key)] = val
    try:
        return SimConfig(**kwargs)
    except ConfigError as exc:
        raise ValidationError(str(exc)) from None


def load_scenario(path) -> tuple[EvacGraph, SimConfig]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError:
        raise
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return parse_scenario(doc)


def scenario_document(graph: EvacGraph, config: SimConfig | None = None, name: str = "", seed: int | None = None) -> dict:
    """Serialise a graph (and optionally a config) back to the scenario schema."""
    config = config or SimConfig()
    nodes = []
    for n in graph.nodes:
        rec: dict[str, Any] = {"id": n.id, "kind": n.kind.value, "deck": n.deck}
        if n.kind != NodeKind.EXIT and n.capacity != DEFAULT_NODE_CAPACITY[n.kind]:
            rec["capacity"] = n.capacity
        if n.position is not None:
            rec["x"], rec["y"] = n.position
        nodes.append(rec)
    edges = [
        {"id": e.id, "a": e.a, "b": e.b, "kind": e.kind.value, "length_m": e.length, "capacity": e.capacity}
        for e in graph.edges
    ]
    dl = config.deadline
    meta: dict[str, Any] = {"name": name or config.name}
    if seed is not None:
        meta["seed"] = seed
    doc: dict[str, Any] = {
        "meta": meta,
        "speeds": {"typical_mps": graph.speeds.typical_mps, "worst_case_mps": graph.speeds.worst_case_mps},
        "deadline": {"t_s_s": dl.t_s, "t_a_s": dl.t_a, "t_el_s": dl.t_el},
        "nodes": nodes,
        "edges": edges,
        "delay": {"pod": config.delay.pod},
        "placement": {"policy": config.placement},
    }
    if config.delay.per_node:
        doc["delay"]["pod_per_node"] = {str(k): v for k, v in sorted(config.delay.per_node.items())}
    if config.passengers is not None:
        doc["placement"]["passengers"] = config.passengers
    if config.hazard:
        doc["hazard"] = {
            "fronts": [
                {"origin": f.origin, "onset_s": f.onset, "speed_mps": f.speed, **({"edges": sorted(f.edges)} if f.edges is not None else {})}
                for f in config.hazard
            ]
        }
    if config.inclination is not None:
        inc = config.inclination
        doc["inclination"] = {
            "theta_max_deg": inc.theta_max,
            "floor": inc.floor,
            "intervals": [{"start_s": s, "angle_deg": a} for s, a in inc.intervals],
        }
    return doc
