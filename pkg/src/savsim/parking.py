"""Parking demand: land-use based baseline estimate with turnover
correction, SAV station demand, and floor-space conversions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .network import LAND_USE_TYPES, Zone

SLOT_AREA_M2 = 30.0

# vehicles per m2 of each land-use type
DEFAULT_RATES = {
    "office": 0.005,
    "commerce": 0.0067,
    "residence": 0.0,
    "industry": 0.0011,
    "park": 0.0,
    "transport": 0.0005,
    "nature": 0.0,
}


class GenerationRateTable(dict):
    """Land-use type -> parking generation rate (veh/m2)."""

    def __init__(self, rates: Mapping[str, float] | None = None):
        merged = dict(DEFAULT_RATES)
        if rates:
            for kind, rate in rates.items():
                if kind not in LAND_USE_TYPES:
                    raise ValueError(f"unknown land-use type {kind!r}")
                merged[kind] = float(rate)
        if any(r < 0 for r in merged.values()):
            raise ValueError("parking generation rates must be non-negative")
        super().__init__(merged)


@dataclass
class StaticEstimate:
    facility_slots: np.ndarray
    garage_slots: np.ndarray

    @property
    def static_total(self) -> np.ndarray:
        return self.facility_slots + self.garage_slots


def static_estimate(zones: Sequence[Zone], rates: Mapping[str, float] | None = None,
                    registered_vehicles: float = 0.0) -> StaticEstimate:
    """Facility slots from land use plus garages allocated by household share."""
    rates = GenerationRateTable(rates) if not isinstance(rates, GenerationRateTable) else rates
    facility = np.array([sum(rates[k] * a for k, a in z.land_use_areas.items()) for z in zones], dtype=float)
    households = np.array([z.households for z in zones], dtype=float)
    if registered_vehicles > 0:
        if households.sum() <= 0:
            raise ValueError("registered vehicles need at least one household")
        garage = registered_vehicles * households / households.sum()
    else:
        garage = np.zeros(len(zones))
    return StaticEstimate(facility, garage)


def fit_turnover(arrivals: Sequence[float], static_totals: Sequence[float]) -> tuple[float, float]:
    """Least-squares slope through the origin of arrivals on static demand.

    Returns ``(slope, r_squared)``; R² is the uncentered coefficient of
    determination, the usual choice for a no-intercept fit.
    """
    y = np.asarray(arrivals, dtype=float)
    x = np.asarray(static_totals, dtype=float)
    if np.count_nonzero(x) < 2:
        raise ValueError("turnover fit needs at least two zones with non-zero static demand")
    slope = float(x @ y / (x @ x))
    resid = y - slope * x
    syy = float(y @ y)
    r2 = 1.0 - float(resid @ resid) / syy if syy > 0 else float("nan")
    return slope, r2


def final_baseline_demand(arrivals: Sequence[float], turnover: float) -> np.ndarray:
    if not turnover > 0:
        raise ValueError("turnover rate must be positive")
    # round half up; np.rint would send 0.5 to the even neighbour
    return np.floor(np.asarray(arrivals, dtype=float) * turnover + 0.5).astype(np.int64)


def sav_station_demand(series) -> np.ndarray:
    """Per-zone maximum of a (samples, zones) occupancy series."""
    arr = np.asarray(series)
    if arr.size == 0:
        return np.zeros(arr.shape[-1] if arr.ndim == 2 else 0, dtype=np.int64)
    if arr.ndim == 1:
        return np.int64(arr.max())
    return arr.max(axis=0).astype(np.int64)


def slots_to_area(slots):
    """Parking space in m2: each slot plus its clearance takes 30 m2."""
    if np.any(np.asarray(slots) < 0):
        raise ValueError("slots must be non-negative")
    return np.asarray(slots) * SLOT_AREA_M2 if np.ndim(slots) else slots * SLOT_AREA_M2


@dataclass
class Decomposition:
    total_reduction: float
    fleet_component: float
    efficiency_component: float
    fleet_share: float
    efficiency_share: float
    flagged: bool


def decompose_reduction(baseline_total: float, sav_total: float, fleet_size: int,
                        registered_vehicles: float) -> Decomposition:
    """Split the parking reduction into a fleet-size part and an efficiency part.

    The fleet part assumes one slot per vehicle; the efficiency part is the
    rest. ``flagged`` is set when the fleet part alone exceeds the reduction.
    """
    if baseline_total < sav_total:
        raise ValueError("SAV parking exceeds the baseline")
    total = baseline_total - sav_total
    fleet = registered_vehicles - fleet_size
    eff = total - fleet
    if total > 0:
        fs, es = fleet / total, eff / total
    else:
        fs = es = 0.0
    return Decomposition(total, fleet, eff, fs, es, fleet > total)


def repurposed_floor_space(freed_area_m2: float, main_use_area_m2: float, far: float) -> float:
    """Freed land as a share of existing floor space of the zone's main use."""
    if main_use_area_m2 <= 0 or far <= 0:
        raise ValueError("main-use area and floor-area ratio must be positive")
    return freed_area_m2 / (main_use_area_m2 * far)


@dataclass
class ParkingEstimate:
    zone_ids: tuple
    facility_slots: np.ndarray
    garage_slots: np.ndarray
    arrivals: np.ndarray
    turnover: float
    r_squared: float
    final_slots: np.ndarray

    @property
    def static_total(self) -> np.ndarray:
        return self.facility_slots + self.garage_slots

    @property
    def area_m2(self) -> np.ndarray:
        return slots_to_area(self.final_slots)


def estimate_baseline(zones: Sequence[Zone], arrivals: Sequence[float], rates=None,
                      registered_vehicles: float = 0.0) -> ParkingEstimate:
    """Static estimate, turnover regression and final per-zone slots in one pass."""
    static = static_estimate(zones, rates, registered_vehicles)
    arrivals = np.asarray(arrivals, dtype=float)
    if not arrivals.any():
        zeros = np.zeros(len(zones), dtype=np.int64)
        return ParkingEstimate(tuple(z.id for z in zones), static.facility_slots, static.garage_slots,
                               arrivals, float("nan"), float("nan"), zeros)
    tau, r2 = fit_turnover(arrivals, static.static_total)
    return ParkingEstimate(tuple(z.id for z in zones), static.facility_slots, static.garage_slots,
                           arrivals, tau, r2, final_baseline_demand(arrivals, tau))
