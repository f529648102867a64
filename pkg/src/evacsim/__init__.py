"""Ship evacuation simulator with deadline-aware routing and stale guidance information."""

from .engine import RunResult, place_evacuees, run
from .graph import EvacGraph, compute_deadline, edge_times, validate
from .layout import generate_layout
from .routing import compute_distance_maps, next_hop
from .scenario import SimConfig, load_scenario

__all__ = [
    "EvacGraph",
    "RunResult",
    "SimConfig",
    "compute_deadline",
    "compute_distance_maps",
    "edge_times",
    "generate_layout",
    "load_scenario",
    "next_hop",
    "place_evacuees",
    "run",
    "validate",
]
