"""OD matrices, daily-to-hourly expansion and the 30-second request stream."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

BIN_SECONDS = 30.0
BINS_PER_HOUR = 120
# carryover is tracked in integer units of 1e-6 veh/h so hourly totals come out exact
_SCALE = 1_000_000


class DemandError(ValueError):
    pass


@dataclass
class ODMatrix:
    """Hourly trips, ``trips[hour, origin, dest]`` in vehicles per hour.

    Zone axes follow ``zone_ids``; hour ``h`` covers clock seconds
    ``[3600 h, 3600 (h + 1))``.
    """

    trips: np.ndarray
    zone_ids: tuple

    def __post_init__(self):
        self.trips = np.asarray(self.trips, dtype=float)
        if self.trips.ndim != 3 or self.trips.shape[1] != self.trips.shape[2]:
            raise DemandError("trips must have shape (hours, zones, zones)")
        if self.trips.shape[1] != len(self.zone_ids):
            raise DemandError("zone axis does not match zone_ids")
        if (self.trips < 0).any() or not np.isfinite(self.trips).all():
            raise DemandError("trips must be finite and non-negative")
        self.zone_ids = tuple(self.zone_ids)

    @property
    def hours(self) -> int:
        return self.trips.shape[0]

    def generation(self) -> np.ndarray:
        """Total trips generated by each zone over all hours."""
        return self.trips.sum(axis=(0, 2))

    def attraction(self, hours: Sequence[int] | None = None) -> np.ndarray:
        """Trips arriving at each zone, optionally over a subset of hours."""
        t = self.trips if hours is None else self.trips[list(hours)]
        return t.sum(axis=(0, 1))

    def rate_at(self, t: float) -> np.ndarray:
        h = int(t // 3600)
        if 0 <= h < self.hours:
            return self.trips[h]
        return np.zeros(self.trips.shape[1:])


def expand_daily_to_hourly(daily, coefficients: Sequence[float], zone_ids=None) -> ODMatrix:
    """Spread a daily OD matrix over 24 hours by time coefficients."""
    coefficients = np.asarray(coefficients, dtype=float)
    if coefficients.shape != (24,):
        raise DemandError("expected 24 time coefficients")
    if (coefficients < 0).any():
        raise DemandError("time coefficients must be non-negative")
    if abs(coefficients.sum() - 1.0) > 1e-9:
        raise DemandError(f"time coefficients sum to {coefficients.sum()!r}, not 1")
    daily = np.asarray(daily, dtype=float)
    if zone_ids is None:
        zone_ids = tuple(range(daily.shape[0]))
    return ODMatrix(coefficients[:, None, None] * daily[None, :, :], zone_ids)


class RequestState(enum.Enum):
    UNASSIGNED = "unassigned"
    WAITLISTED = "waitlisted"
    ASSIGNED = "assigned"
    RIDING = "riding"
    COMPLETED = "completed"


@dataclass
class TripRequest:
    id: int
    origin: int
    dest: int
    generation_time: float
    state: RequestState = RequestState.UNASSIGNED
    assignment_time: float | None = None
    pickup_time: float | None = None
    arrival_time: float | None = None
    vehicle: int | None = None

    @property
    def wait(self) -> float | None:
        if self.pickup_time is None:
            return None
        return self.pickup_time - self.generation_time


@dataclass
class CarryoverAccumulator:
    """Fractional per-OD-pair trips not yet emitted."""

    n_zones: int
    _units: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._units = np.zeros((self.n_zones, self.n_zones), dtype=np.int64)

    @property
    def residual(self) -> np.ndarray:
        return self._units / (BINS_PER_HOUR * _SCALE)

    def add(self, hourly_rates: np.ndarray) -> np.ndarray:
        """Add one bin of demand and return the whole trips now due per pair."""
        self._units += np.rint(np.asarray(hourly_rates) * _SCALE).astype(np.int64)
        due, self._units = np.divmod(self._units, BINS_PER_HOUR * _SCALE)
        return due


class RequestStream:
    """Emits :class:`TripRequest` objects bin by bin with dense ids."""

    def __init__(self, od: ODMatrix):
        self.od = od
        self.acc = CarryoverAccumulator(len(od.zone_ids))
        self.next_id = 0

    def emit(self, t: float) -> list[TripRequest]:
        return emit_requests(self.od, BIN_SECONDS, self.acc, t, self)


def emit_requests(od: ODMatrix, bin_seconds: float, acc: CarryoverAccumulator, t: float,
                  counter: RequestStream | None = None) -> list[TripRequest]:
    """Requests generated in the bin starting at ``t``.

    Each pair accumulates ``rate * bin / 3600`` vehicles; whole vehicles are
    emitted and the remainder carried into the next bin. Requests are
    ordered by (origin, destination) and numbered consecutively.
    """
    if bin_seconds != BIN_SECONDS:
        raise DemandError("only 30 s bins are supported")
    due = acc.add(od.rate_at(t))
    origins, dests = np.nonzero(due)
    out = []
    next_id = counter.next_id if counter is not None else 0
    for o, d in zip(origins.tolist(), dests.tolist()):
        for _ in range(int(due[o, d])):
            out.append(TripRequest(next_id, o, d, t))
            next_id += 1
    if counter is not None:
        counter.next_id = next_id
    return out


def expected_generation(od: ODMatrix, zone: int | None, start: float, end: float) -> float:
    """Trips expected from ``zone`` (or all zones if None) in ``[start, end)``.

    Hourly rates are spread uniformly within each hour.
    """
    gen = od.trips.sum(axis=2)
    if zone is not None:
        gen = gen[:, zone]
    else:
        gen = gen.sum(axis=1)
    total = 0.0
    h = math.floor(start / 3600)
    while h * 3600 < end:
        lo = max(start, h * 3600)
        hi = min(end, (h + 1) * 3600)
        if 0 <= h < od.hours and hi > lo:
            total += float(gen[h]) * (hi - lo) / 3600.0
        h += 1
    return total


def expected_generation_by_zone(od: ODMatrix, start: float, end: float) -> np.ndarray:
    gen = od.trips.sum(axis=2)
    out = np.zeros(gen.shape[1])
    h = math.floor(start / 3600)
    while h * 3600 < end:
        lo = max(start, h * 3600)
        hi = min(end, (h + 1) * 3600)
        if 0 <= h < od.hours and hi > lo:
            out += gen[h] * ((hi - lo) / 3600.0)
        h += 1
    return out
