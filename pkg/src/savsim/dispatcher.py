"""Central SAV dispatcher: fleet seeding, nearest-vehicle matching,
Block Balance relocation and the vehicle state machine."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class VehicleState(enum.Enum):
    PARKED = "parked_at_station"
    RETURNING = "returning_to_station"
    RELOCATING = "relocating"
    PICKING_UP = "picking_up"
    OCCUPIED = "occupied"


AVAILABLE = frozenset({VehicleState.PARKED, VehicleState.RETURNING, VehicleState.RELOCATING})


class IllegalTransition(RuntimeError):
    pass


@dataclass
class Vehicle:
    id: int
    state: VehicleState = VehicleState.PARKED
    zone: int = -1
    target_zone: int | None = None
    request: int | None = None
    next_request: int | None = None
    odometer_km: float = 0.0
    empty_km: float = 0.0

    @property
    def available(self) -> bool:
        return self.state in AVAILABLE

    @property
    def empty(self) -> bool:
        return self.state is not VehicleState.OCCUPIED


_TRANSITIONS = {
    ("assigned", VehicleState.PARKED): VehicleState.PICKING_UP,
    ("assigned", VehicleState.RETURNING): VehicleState.PICKING_UP,
    ("assigned", VehicleState.RELOCATING): VehicleState.PICKING_UP,
    ("reached_pickup", VehicleState.PICKING_UP): VehicleState.OCCUPIED,
    ("reached_destination", VehicleState.OCCUPIED): VehicleState.RETURNING,
    ("reached_station", VehicleState.RETURNING): VehicleState.PARKED,
    ("reached_station", VehicleState.RELOCATING): VehicleState.PARKED,
    ("relocation_ordered", VehicleState.PARKED): VehicleState.RELOCATING,
}


def on_vehicle_event(vehicle: Vehicle, event: str) -> Vehicle:
    """Apply a state-machine event in place and return the vehicle.

    ``reached_destination`` leads to ``picking_up`` instead of
    ``returning_to_station`` when the vehicle already holds a booking for
    its next traveler.
    """
    if event == "reached_destination" and vehicle.state is VehicleState.OCCUPIED and vehicle.next_request is not None:
        vehicle.state = VehicleState.PICKING_UP
        return vehicle
    new = _TRANSITIONS.get((event, vehicle.state))
    if new is None:
        raise IllegalTransition(f"vehicle {vehicle.id}: {event!r} not allowed in state {vehicle.state.value}")
    vehicle.state = new
    return vehicle


@dataclass
class Station:
    zone: int
    node: int
    parked: set = field(default_factory=set)

    @property
    def occupancy(self) -> int:
        return len(self.parked)


def initial_distribution(fleet_size: int, generation: Sequence[float]) -> np.ndarray:
    """Split the fleet over zones in proportion to trip generation.

    Rounding uses the largest-remainder rule; equal remainders go to the
    lower zone index, so the counts always sum to ``fleet_size``.
    """
    g = np.asarray(generation, dtype=float)
    if fleet_size < 0:
        raise ValueError("fleet size must be non-negative")
    if (g < 0).any():
        raise ValueError("generation must be non-negative")
    total = g.sum()
    if total <= 0:
        raise ValueError("all-zero trip generation")
    exact = fleet_size * g / total
    counts = np.floor(exact).astype(np.int64)
    short = fleet_size - int(counts.sum())
    if short:
        order = sorted(range(len(g)), key=lambda i: (-(exact[i] - counts[i]), i))
        for i in order[:short]:
            counts[i] += 1
    return counts


def block_balance(savs_block: float, savs_total: float, demand_block: float, demand_total: float) -> float:
    """Supply share minus demand share of a zone, scaled by fleet size.

    Positive means oversupply. With no expected demand anywhere the value
    falls back to the plain supply ``savs_block``.
    """
    if savs_total <= 0:
        raise ValueError("fleet size must be positive")
    if demand_total <= 0:
        return float(savs_block)
    return savs_total * (savs_block / savs_total - demand_block / demand_total)


@dataclass
class BlockBalanceReport:
    time: float
    values: np.ndarray
    savs_block: np.ndarray
    savs_total: int
    demand_block: np.ndarray
    demand_total: float

    @classmethod
    def compute(cls, time, savs_block, savs_total, demand_block) -> "BlockBalanceReport":
        savs_block = np.asarray(savs_block)
        demand_block = np.asarray(demand_block, dtype=float)
        demand_total = float(demand_block.sum())
        values = np.array([block_balance(s, savs_total, d, demand_total) for s, d in zip(savs_block, demand_block)])
        return cls(time, values, savs_block, savs_total, demand_block, demand_total)


@dataclass
class RelocationResult:
    moves: list  # (donor zone, recipient zone) per vehicle, in dispatch order
    balances: np.ndarray
    residual: dict  # zone -> balance left outside the thresholds


def relocate(balances: Sequence[float], parked: Sequence[int], neighbors: Sequence[Sequence[int]],
             thresholds: tuple = (-5.0, 5.0), radius: int = 2) -> RelocationResult:
    """Greedy Block Balance relocation.

    Donors (balance above the upper threshold) are served in order of
    decreasing balance. Each sends one parked vehicle at a time to the
    nearest zone, in breadth-first order over ``neighbors`` up to
    ``radius`` hops, whose balance is below the lower threshold. Every move
    lowers the donor by one and raises the recipient by one.
    """
    low, high = thresholds
    if not low < high:
        raise ValueError("thresholds must satisfy lower < upper")
    bal = np.array(balances, dtype=float)
    stock = list(parked)
    moves = []
    donors = sorted((z for z in range(len(bal)) if bal[z] > high), key=lambda z: (-bal[z], z))
    for donor in donors:
        rings = _rings(donor, neighbors, radius)
        while bal[donor] > high and stock[donor] > 0:
            target = next((z for z in rings if bal[z] < low), None)
            if target is None:
                break
            bal[donor] -= 1
            bal[target] += 1
            stock[donor] -= 1
            moves.append((donor, target))
    residual = {z: float(bal[z]) for z in range(len(bal)) if bal[z] > high or bal[z] < low}
    return RelocationResult(moves, bal, residual)


def _rings(zone, neighbors, radius):
    """Zones within ``radius`` hops, nearest first, lower index first within a ring."""
    seen = {zone}
    frontier = [zone]
    out = []
    for _ in range(radius):
        nxt = set()
        for z in frontier:
            for nb in neighbors[z]:
                if nb not in seen:
                    nxt.add(nb)
        ring = sorted(nxt)
        seen.update(ring)
        out.extend(ring)
        frontier = ring
    return out


@dataclass
class MatchResult:
    assignments: list  # (request id, vehicle id, eta)
    waitlist: list  # request ids


def match(requests: Sequence, vehicles: Sequence[int], eta: Callable[[object], np.ndarray],
          max_wait: float) -> MatchResult:
    """Sequential greedy matching of FCFS-sorted travelers to the nearest vehicle.

    ``eta(request)`` returns arrival times aligned with ``vehicles``.
    Equal ETAs go to the vehicle listed first. A traveler whose best ETA
    exceeds ``max_wait`` is waitlisted and the vehicles stay free.
    """
    taken = np.zeros(len(vehicles), dtype=bool)
    assignments = []
    waitlist = []
    for req in requests:
        rid = getattr(req, "id", req)
        if taken.all():
            waitlist.append(rid)
            continue
        etas = np.where(taken, math.inf, np.asarray(eta(req), dtype=float))
        k = int(np.argmin(etas))
        if not etas[k] <= max_wait:
            waitlist.append(rid)
            continue
        taken[k] = True
        assignments.append((rid, vehicles[k], float(etas[k])))
    return MatchResult(assignments, waitlist)


def fcfs_order(waitlisted: Sequence, new: Sequence) -> list:
    """Waitlisted travelers first, then new ones, each by (generation time, id)."""
    key = lambda r: (r.generation_time, r.id)
    return sorted(waitlisted, key=key) + sorted(new, key=key)
