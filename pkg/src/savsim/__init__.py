"""Shared autonomous vehicle fleet simulation on a mesoscopic traffic model,
with parking demand estimation for a private-vehicle baseline."""

from .analysis import ZoneMetrics, format_change, scenario_diff, spearman, zone_metrics
from .demand import CarryoverAccumulator, ODMatrix, RequestStream, TripRequest, emit_requests, \
    expand_daily_to_hourly, expected_generation
from .dispatcher import Vehicle, VehicleState, block_balance, initial_distribution, match, relocate
from .flow import FlowModel
from .network import Link, Network, NetworkError, Node, Zone, build_network
from .parking import decompose_reduction, estimate_baseline, fit_turnover, repurposed_floor_space, slots_to_area
from .routing import TravelTimeTable, k_shortest_routes, shortest_path
from .scenario import ScenarioConfig, ScenarioInputs, compare, run_baseline, run_sav, sweep

__version__ = "0.1.0"

__all__ = [
    "ZoneMetrics",
    "format_change",
    "scenario_diff",
    "spearman",
    "zone_metrics",
    "CarryoverAccumulator",
    "ODMatrix",
    "RequestStream",
    "TripRequest",
    "emit_requests",
    "expand_daily_to_hourly",
    "expected_generation",
    "Vehicle",
    "VehicleState",
    "block_balance",
    "initial_distribution",
    "match",
    "relocate",
    "FlowModel",
    "Link",
    "Network",
    "NetworkError",
    "Node",
    "Zone",
    "build_network",
    "decompose_reduction",
    "estimate_baseline",
    "fit_turnover",
    "repurposed_floor_space",
    "slots_to_area",
    "TravelTimeTable",
    "k_shortest_routes",
    "shortest_path",
    "ScenarioConfig",
    "ScenarioInputs",
    "compare",
    "run_baseline",
    "run_sav",
    "sweep",
]
