"""Two-scenario experiment: private-vehicle baseline versus a fully
replaced SAV fleet on the same network, zones and demand."""
from __future__ import annotations

import dataclasses
import hashlib
import heapq
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import parking as pk
from .analysis import (ZoneMetrics, correlation_matrix, desire_lines_geojson, scenario_diff,
                       zone_metrics)
from .demand import ODMatrix, RequestState, RequestStream, TripRequest, expected_generation_by_zone
from .dispatcher import (BlockBalanceReport, Station, Vehicle, VehicleState, fcfs_order, initial_distribution,
                         match, on_vehicle_event, relocate)
from .flow import FlowModel, choose_route, refresh_travel_times
from .network import LAND_USE_TYPES, Network, NetworkError
from .routing import RouteCache, TravelTimeTable

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class InputMismatchError(ValueError):
    pass


def parse_clock(value) -> float:
    """Seconds from ``HH:MM[:SS]`` or a plain number."""
    if isinstance(value, (int, float)):
        return float(value)
    s = str(value).strip()
    if ":" in s:
        parts = [float(p) for p in s.split(":")]
        while len(parts) < 3:
            parts.append(0.0)
        return parts[0] * 3600 + parts[1] * 60 + parts[2]
    return float(s)


@dataclass
class ScenarioConfig:
    """Run parameters. Times are seconds of the simulated day."""

    scenario: str = "sav"
    fleet_size: int = 0
    max_wait: float = 600.0
    matching_period: float = 30.0
    relocation_period: float = 300.0
    tt_refresh_period: float = 600.0
    threshold_low: float = -5.0
    threshold_high: float = 5.0
    logit_theta: float = 0.01
    k_routes: int = 3
    dt: float = 1.0
    warm_up: float = 3 * 3600.0
    report_start: float = 7 * 3600.0
    report_end: float = 9 * 3600.0
    end: float | None = None
    seed: int = 0
    vot_weight: float = 0.0
    dwell: float = 0.0
    relocation_radius: int = 2
    registered_vehicles: float = 0.0

    @property
    def start(self) -> float:
        return self.report_start - self.warm_up

    @property
    def horizon(self) -> float:
        return self.report_end if self.end is None else self.end

    def validate(self) -> "ScenarioConfig":
        if self.scenario not in ("baseline", "sav"):
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        for name in ("matching_period", "relocation_period", "tt_refresh_period", "warm_up", "report_start",
                     "report_end", "dwell"):
            v = getattr(self, name)
            n = round(v / self.dt)
            if abs(n * self.dt - v) > 1e-9:
                raise ConfigError(f"{name}={v} is not a multiple of dt={self.dt}")
        if self.matching_period != 30.0:
            raise ConfigError("requests are binned every 30 s, so matching_period must be 30")
        if not self.threshold_low < self.threshold_high:
            raise ConfigError("threshold_low must be below threshold_high")
        if self.warm_up < 0 or self.start < 0:
            raise ConfigError("warm-up must be non-negative and start at or after midnight")
        if not self.report_start < self.report_end <= self.horizon:
            raise ConfigError("reporting window must be non-empty and within the horizon")
        if self.scenario == "sav" and self.fleet_size <= 0:
            raise ConfigError("the SAV scenario needs fleet_size > 0")
        if self.k_routes < 1 or self.logit_theta < 0 or self.max_wait < 0:
            raise ConfigError("k_routes >= 1, logit_theta >= 0 and max_wait >= 0 required")
        return self

    _CLOCK_KEYS = ("warm_up", "report_start", "report_end", "end")

    @classmethod
    def from_text(cls, text: str) -> "ScenarioConfig":
        """Flat ``key = value`` lines; ``#`` starts a comment."""
        fields = {f.name: f for f in dataclasses.fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value")
            key, value = (p.strip() for p in line.split("=", 1))
            if key not in fields:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            values[key] = cls._coerce(key, value)
        return cls(**values).validate()

    @classmethod
    def _coerce(cls, key, value):
        if key == "scenario":
            return value
        if key in cls._CLOCK_KEYS:
            return parse_clock(value)
        if key in ("fleet_size", "k_routes", "seed", "relocation_radius"):
            return int(value)
        return float(value)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        with open(path) as f:
            return cls.from_text(f.read())

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


@dataclass
class ScenarioInputs:
    network: Network
    od: ODMatrix
    rates: dict | None = None
    digest: str | None = None

    def __post_init__(self):
        if tuple(self.od.zone_ids) != tuple(z.id for z in self.network.zones):
            raise ValueError("OD zone order must follow the network's zone order")

    def fingerprint(self) -> str:
        """Hash of the inputs; raw file digest when loaded from disk."""
        if self.digest is not None:
            return self.digest
        h = hashlib.sha256()
        net = self.network
        h.update(repr([(n.id, n.x, n.y) for n in net.nodes]).encode())
        h.update(repr([dataclasses.astuple(l) for l in net.links]).encode())
        h.update(repr([(z.id, z.station_node, sorted(z.land_use_areas.items()), z.households, z.neighbors)
                       for z in net.zones]).encode())
        h.update(np.ascontiguousarray(self.od.trips).tobytes())
        h.update(repr(sorted((self.rates or {}).items())).encode())
        return h.hexdigest()


@dataclass
class RunResult:
    scenario: str
    config: ScenarioConfig
    fingerprint: str
    metrics: ZoneMetrics
    parking_slots: np.ndarray
    zone_info: list
    summary: dict
    events: list | None = None
    parking_estimate: pk.ParkingEstimate | None = None
    dispatch_log: list = field(default_factory=list)
    waitlist_series: list = field(default_factory=list)
    occupancy: np.ndarray | None = None
    desire_lines: dict | None = None
    requests: list = field(default_factory=list)
    vehicles: list = field(default_factory=list)


def _zone_info(network: Network) -> list:
    return [{"zone_id": z.id, "dominant_use": z.dominant_land_use(), "area_m2": z.area,
             **{f"{k}_m2": z.land_use_areas.get(k, 0.0) for k in LAND_USE_TYPES}} for z in network.zones]


def _window_hours_attraction(od: ODMatrix, start: float, end: float) -> np.ndarray:
    """Trips arriving in each zone over ``[start, end)``, spreading each hour uniformly."""
    out = np.zeros(len(od.zone_ids))
    h = math.floor(start / 3600)
    while h * 3600 < end:
        lo, hi = max(start, h * 3600), min(end, (h + 1) * 3600)
        if 0 <= h < od.hours and hi > lo:
            out += od.trips[h].sum(axis=0) * ((hi - lo) / 3600.0)
        h += 1
    return out


class _Engine:
    """State shared by both scenarios: flow model, table, route choice."""

    def __init__(self, config: ScenarioConfig, inputs: ScenarioInputs, record_events=True):
        self.config = config.validate()
        self.inputs = inputs
        self.net = inputs.network
        self.od = inputs.od
        self.flow = FlowModel(self.net, config.dt, config.start, record_events)
        self.table = TravelTimeTable.free_flow(self.net, config.start)
        self.cache = RouteCache(self.net, config.k_routes, config.vot_weight)
        self.rng = np.random.default_rng(config.seed)
        self.stream = RequestStream(self.od)
        self.requests: dict = {}
        pairs = {(int(o), int(d)) for o, d in zip(*np.nonzero(self.od.trips.sum(axis=0)))}
        self.net.check_demand_reachability(pairs)

    def pick_route(self, origin_node: int, dest_node: int):
        routes = self.cache.routes(origin_node, dest_node, self.table)
        if not routes:
            raise NetworkError(f"no route from node {self.net.nodes[origin_node].id!r} "
                               f"to {self.net.nodes[dest_node].id!r}")
        return routes[choose_route(routes, self.config.logit_theta, self.rng)]

    def tick(self, t):
        """Clock-driven bookkeeping common to both scenarios; returns new requests."""
        cfg = self.config
        clock = self.flow.clock
        if t > cfg.start and clock.due(cfg.tt_refresh_period):
            self.table = refresh_travel_times(self.flow, self.table, t)
        if clock.due(cfg.matching_period):
            new = self.stream.emit(t)
            for r in new:
                self.requests[r.id] = r
            return new
        return []

    def window_requests(self):
        cfg = self.config
        return [r for r in self.requests.values() if cfg.report_start <= r.generation_time < cfg.report_end]


def run_baseline(config: ScenarioConfig, inputs: ScenarioInputs, record_events: bool = True) -> RunResult:
    """Every trip drives its own private vehicle from its generation time."""
    config = dataclasses.replace(config, scenario="baseline").validate()
    eng = _Engine(config, inputs, record_events)
    net, flow = eng.net, eng.flow
    stations = net.station_nodes
    t = config.start
    while t < config.horizon - 1e-9:
        for r in eng.tick(t):
            r.state = RequestState.RIDING
            r.assignment_time = r.pickup_time = t
            o, d = int(stations[r.origin]), int(stations[r.dest])
            if o == d:
                r.state, r.arrival_time = RequestState.COMPLETED, t
                continue
            flow.depart(r.id, eng.pick_route(o, d).links, t)
        for vid, _node, when in flow.advance():
            r = eng.requests[vid]
            r.state, r.arrival_time = RequestState.COMPLETED, when
        t = flow.t
    events = flow.finish()
    window = (config.report_start, config.report_end)
    metrics = zone_metrics(events, net, window) if record_events else _metrics_unavailable(net)

    arrivals = _window_hours_attraction(eng.od, *window)
    estimate = pk.estimate_baseline(net.zones, arrivals, inputs.rates, config.registered_vehicles)
    win = eng.window_requests()
    summary = {
        "scenario": "baseline",
        "requests_total": len(eng.requests),
        "requests_in_window": len(win),
        "completed_in_window": sum(r.state is RequestState.COMPLETED for r in win),
        "in_progress_in_window": sum(r.state is RequestState.RIDING for r in win),
        "waitlisted_in_window": 0,
        "on_network_at_end": flow.on_network(),
        "turnover": estimate.turnover,
        "turnover_r2": estimate.r_squared,
        "parking_total": int(estimate.final_slots.sum()),
        **{f"total_{k}": v for k, v in metrics.totals().items()},
    }
    return RunResult("baseline", config, inputs.fingerprint(), metrics, estimate.final_slots.copy(),
                     _zone_info(net), summary, events if record_events else None, estimate,
                     requests=sorted(eng.requests.values(), key=lambda r: r.id))


def _metrics_unavailable(net):
    z = np.zeros(net.n_zones)
    return ZoneMetrics(tuple(zz.id for zz in net.zones), z, z.copy(), z.copy(), z.copy(), z.copy(),
                       np.zeros(net.n_zones, dtype=np.int64))


class SAVSimulation:
    """Dispatcher coupled to the flow model (matching, relocation, stations)."""

    def __init__(self, config: ScenarioConfig, inputs: ScenarioInputs, record_events=True, check=False):
        config = dataclasses.replace(config, scenario="sav").validate()
        self.eng = _Engine(config, inputs, record_events)
        self.config = config
        self.check = check
        net = self.net = self.eng.net
        self.flow = self.eng.flow
        self.stations = [Station(zi, int(net.station_nodes[zi])) for zi in range(net.n_zones)]
        self.neighbors = [[net.zone_index[nb] for nb in z.neighbors] for z in net.zones]
        generation = expected_generation_by_zone(self.eng.od, config.start, config.horizon)
        counts = initial_distribution(config.fleet_size, generation)
        self.vehicles: list[Vehicle] = []
        for zi, n in enumerate(counts):
            for _ in range(int(n)):
                v = Vehicle(len(self.vehicles), VehicleState.PARKED, zone=zi)
                self.vehicles.append(v)
                self.stations[zi].parked.add(v.id)
        self.waitlist: list[TripRequest] = []
        self.log: list = []
        self.waitlist_series: list = []
        self.relocation_reports: list = []
        self.flows = {"pickup": {}, "relocation": {}}
        self._scheduled: list = []
        self._seq = 0
        steps = int(round((config.horizon - config.start) / config.dt))
        self.occupancy = np.zeros((steps, net.n_zones), dtype=np.int32)
        self._step = 0

    # -- helpers ------------------------------------------------------------

    def _log(self, t, event, vid, rid=None, o=None, d=None, eta=None):
        zid = self.net.zones
        self.log.append((t, event, vid, rid, None if o is None else zid[o].id, None if d is None else zid[d].id, eta))

    def _in_window(self, t):
        return self.config.report_start <= t < self.config.report_end

    def _schedule(self, when, vid, node):
        self._seq += 1
        heapq.heappush(self._scheduled, (when, self._seq, vid, node))

    def _start_leg(self, v: Vehicle, from_node: int, to_node: int, ready: float):
        if from_node == to_node:
            if ready <= self.flow.t:
                self._arrive(v.id, to_node, ready)
            else:
                self._schedule(ready, v.id, to_node)
            return
        route = self.eng.pick_route(from_node, to_node)
        self.flow.depart(v.id, route.links, ready, empty=v.empty)

    def _redirect(self, v: Vehicle, to_node: int, t: float):
        """Send a vehicle that is already moving in the flow model somewhere else."""
        pos = self.flow.position(v.id)
        if pos[0] == "node":
            node = pos[1]
            if node == to_node:
                self.flow.withdraw(v.id)
                self._arrive(v.id, node, t)
                return
            self.flow.reroute(v.id, self.eng.pick_route(node, to_node).links, empty=v.empty)
            return
        end = int(self.net.link_to[pos[1]])
        links = () if end == to_node else self.eng.pick_route(end, to_node).links
        self.flow.reroute(v.id, links, empty=v.empty)

    def _location_zone(self, v: Vehicle) -> int:
        if v.state is VehicleState.PARKED:
            return v.zone
        if v.id in self.flow.vehicles:
            pos = self.flow.position(v.id)
            if pos[0] == "link":
                return int(self.net.link_zone[pos[1]])
            z = int(self.net.node_zone[pos[1]])
            return z if z >= 0 else v.zone
        return v.zone

    # -- vehicle events -----------------------------------------------------

    def _arrive(self, vid, node, t):
        v = self.vehicles[vid]
        cfg = self.config
        reqs = self.eng.requests
        if v.state is VehicleState.PICKING_UP:
            r = reqs[v.request]
            on_vehicle_event(v, "reached_pickup")
            r.state, r.pickup_time = RequestState.RIDING, t
            self._log(t, "picked_up", vid, r.id, r.origin, r.dest)
            self._start_leg(v, node, int(self.net.station_nodes[r.dest]), t + cfg.dwell)
        elif v.state is VehicleState.OCCUPIED:
            r = reqs[v.request]
            r.state, r.arrival_time = RequestState.COMPLETED, t
            self._log(t, "dropped_off", vid, r.id, r.origin, r.dest)
            v.zone = r.dest
            on_vehicle_event(v, "reached_destination")
            if v.state is VehicleState.PICKING_UP:
                v.request, v.next_request = v.next_request, None
                nxt = reqs[v.request]
                self._start_leg(v, node, int(self.net.station_nodes[nxt.origin]), t + cfg.dwell)
            else:
                v.request = None
                v.target_zone = r.dest
                self._start_leg(v, node, int(self.net.station_nodes[r.dest]), t + cfg.dwell)
        elif v.state in (VehicleState.RETURNING, VehicleState.RELOCATING):
            on_vehicle_event(v, "reached_station")
            v.zone = v.target_zone
            v.target_zone = None
            self.stations[v.zone].parked.add(vid)
            self._log(t, "parked", vid, None, None, v.zone)
        else:
            raise AssertionError(f"vehicle {vid} arrived in state {v.state}")

    # -- dispatcher turns ---------------------------------------------------

    def _candidates(self, t):
        """Available vehicles with their ETA anchor node and time offset."""
        table = self.eng.table.times
        ids, anchors, offsets = [], [], []
        link_to = self.net.link_to
        for v in self.vehicles:
            if v.state is VehicleState.PARKED:
                ids.append(v.id)
                anchors.append(self.stations[v.zone].node)
                offsets.append(0.0)
            elif v.state in (VehicleState.RETURNING, VehicleState.RELOCATING):
                if v.id not in self.flow.vehicles:
                    continue  # zero-length leg with a pending dwell
                pos = self.flow.position(v.id)
                ids.append(v.id)
                if pos[0] == "node":
                    anchors.append(pos[1])
                    offsets.append(0.0)
                else:
                    anchors.append(int(link_to[pos[1]]))
                    offsets.append(max(0.0, pos[2] + table[pos[1]] - t))
            elif v.state is VehicleState.OCCUPIED and v.next_request is None:
                if v.id not in self.flow.vehicles:
                    continue
                pos = self.flow.position(v.id)
                rest = sum(table[li] for li in self.flow.remaining_links(v.id))
                if pos[0] == "node":
                    here = max(0.0, self.flow.vehicles[v.id].ready - t)
                else:
                    here = max(0.0, pos[2] + table[pos[1]] - t)
                ids.append(v.id)
                anchors.append(int(self.net.station_nodes[self.eng.requests[v.request].dest]))
                offsets.append(here + rest + self.config.dwell)
        return ids, np.array(anchors, dtype=np.int64), np.array(offsets, dtype=float)

    def matching_turn(self, t, new_requests):
        cfg = self.config
        ordered = fcfs_order(self.waitlist, new_requests)
        if not ordered:
            self.waitlist_series.append((t, 0))
            return
        ids, anchors, offsets = self._candidates(t)
        stations = self.net.station_nodes

        def eta(req):
            tree = self.eng.cache.times_to(int(stations[req.origin]), self.eng.table)
            return offsets + tree[anchors]

        result = match(ordered, ids, eta, cfg.max_wait)
        if self.check:
            self._check_matching(ordered, ids, eta, result)
        reqs = self.eng.requests
        for rid, vid, est in result.assignments:
            r, v = reqs[rid], self.vehicles[vid]
            r.state, r.assignment_time, r.vehicle = RequestState.ASSIGNED, t, vid
            from_zone = self._location_zone(v) if v.state is not VehicleState.OCCUPIED else reqs[v.request].dest
            self._log(t, "assigned", vid, rid, r.origin, r.dest, est)
            if self._in_window(t):
                key = (from_zone, r.origin)
                self.flows["pickup"][key] = self.flows["pickup"].get(key, 0) + 1
            target = int(stations[r.origin])
            if v.state is VehicleState.OCCUPIED:
                v.next_request = rid
                continue
            was_parked = v.state is VehicleState.PARKED
            on_vehicle_event(v, "assigned")
            v.request, v.target_zone = rid, None
            if was_parked:
                self.stations[v.zone].parked.discard(vid)
                self._start_leg(v, self.stations[v.zone].node, target, t)
            else:
                self._redirect(v, target, t)
        waiting = set(result.waitlist)
        self.waitlist = [r for r in ordered if r.id in waiting]
        for r in self.waitlist:
            if r.state is not RequestState.WAITLISTED:
                r.state = RequestState.WAITLISTED
                self._log(t, "waitlisted", None, r.id, r.origin, r.dest)
        self.waitlist_series.append((t, len(self.waitlist)))

    def _check_matching(self, ordered, ids, eta, result):
        taken = set()
        by_id = {r.id: r for r in ordered}
        for rid, vid, est in result.assignments:
            etas = eta(by_id[rid])
            for k, other in enumerate(ids):
                if other not in taken and etas[k] < est:
                    raise AssertionError(f"request {rid}: vehicle {other} was closer than {vid}")
            taken.add(vid)

    def relocation_turn(self, t):
        cfg = self.config
        parked = np.array([len(s.parked) for s in self.stations])
        demand = expected_generation_by_zone(self.eng.od, t, t + cfg.relocation_period)
        report = BlockBalanceReport.compute(t, parked, cfg.fleet_size, demand)
        res = relocate(report.values, parked, self.neighbors, (cfg.threshold_low, cfg.threshold_high),
                       cfg.relocation_radius)
        for donor, target in res.moves:
            st = self.stations[donor]
            vid = min(st.parked)
            v = self.vehicles[vid]
            on_vehicle_event(v, "relocation_ordered")
            st.parked.discard(vid)
            v.target_zone = target
            self._log(t, "relocation_ordered", vid, None, donor, target)
            if self._in_window(t):
                key = (donor, target)
                self.flows["relocation"][key] = self.flows["relocation"].get(key, 0) + 1
            self._start_leg(v, st.node, self.stations[target].node, t)
        self.relocation_reports.append((t, len(res.moves), len(res.residual)))

    # -- main loop ----------------------------------------------------------

    def step(self):
        cfg = self.config
        flow = self.flow
        t = flow.t
        while self._scheduled and self._scheduled[0][0] <= t + 1e-9:
            when, _, vid, node = heapq.heappop(self._scheduled)
            self._arrive(vid, node, when)
        new = self.eng.tick(t)
        if flow.clock.due(cfg.matching_period):
            self.matching_turn(t, new)
        if flow.clock.due(cfg.relocation_period):
            self.relocation_turn(t)
        self.occupancy[self._step] = [len(s.parked) for s in self.stations]
        self._step += 1
        if self.check:
            self.check_invariants()
        for vid, node, when in flow.advance():
            self._arrive(vid, node, when)
        lengths = self.net.length
        for tr in flow.traversals:
            v = self.vehicles[tr.vehicle]
            km = lengths[tr.link] / 1000.0
            v.odometer_km += km
            if tr.empty:
                v.empty_km += km

    def check_invariants(self):
        counts = {s: 0 for s in VehicleState}
        for v in self.vehicles:
            counts[v.state] += 1
        assert sum(counts.values()) == self.config.fleet_size
        parked = [vid for s in self.stations for vid in s.parked]
        assert len(parked) == len(set(parked)) == counts[VehicleState.PARKED]
        for v in self.vehicles:
            assert v.odometer_km + 1e-9 >= v.empty_km >= 0
            if v.state is VehicleState.OCCUPIED:
                assert self.eng.requests[v.request].state is RequestState.RIDING

    def run(self) -> RunResult:
        cfg = self.config
        while self.flow.t < cfg.horizon - 1e-9:
            self.step()
        return self._result()

    def _result(self) -> RunResult:
        cfg = self.config
        eng = self.eng
        net = self.net
        events = self.flow.finish()
        window = (cfg.report_start, cfg.report_end)
        record = self.flow.record_events
        metrics = zone_metrics(events, net, window) if record else _metrics_unavailable(net)
        lo = int(round((cfg.report_start - cfg.start) / cfg.dt))
        hi = int(round((cfg.report_end - cfg.start) / cfg.dt))
        station_slots = pk.sav_station_demand(self.occupancy[lo:hi])
        win = eng.window_requests()
        waits = np.array([r.wait for r in win if r.pickup_time is not None], dtype=float)
        state_count = lambda *states: sum(r.state in states for r in win)
        totals = metrics.totals()
        summary = {
            "scenario": "sav",
            "fleet_size": cfg.fleet_size,
            "requests_total": len(eng.requests),
            "requests_in_window": len(win),
            "completed_in_window": state_count(RequestState.COMPLETED),
            "in_progress_in_window": state_count(RequestState.ASSIGNED, RequestState.RIDING),
            "waitlisted_in_window": state_count(RequestState.WAITLISTED, RequestState.UNASSIGNED),
            "picked_up_in_window": int(waits.size),
            "wait_mean_s": float(waits.mean()) if waits.size else float("nan"),
            "wait_p50_s": float(np.percentile(waits, 50)) if waits.size else float("nan"),
            "wait_p95_s": float(np.percentile(waits, 95)) if waits.size else float("nan"),
            "wait_max_s": float(waits.max()) if waits.size else float("nan"),
            "waitlist_max": max((n for _, n in self.waitlist_series), default=0),
            "unserved_at_end": sum(r.state in (RequestState.WAITLISTED, RequestState.UNASSIGNED)
                                   for r in eng.requests.values()),
            "relocation_moves": sum(n for _, n, _ in self.relocation_reports),
            "fleet_km": float(sum(v.odometer_km for v in self.vehicles)),
            "fleet_empty_km": float(sum(v.empty_km for v in self.vehicles)),
            "parking_total": int(station_slots.sum()),
            **{f"total_{k}": v for k, v in totals.items()},
            "total_occupied_vkt": totals["vkt"] - totals["empty_vkt"],
        }
        flows = {k: {key: v for key, v in d.items()} for k, d in self.flows.items()}
        return RunResult("sav", cfg, eng.inputs.fingerprint(), metrics, station_slots, _zone_info(net), summary,
                         events if record else None, None, self.log, self.waitlist_series, self.occupancy,
                         desire_lines_geojson(flows, net), sorted(eng.requests.values(), key=lambda r: r.id),
                         self.vehicles)


def run_sav(config: ScenarioConfig, inputs: ScenarioInputs, record_events: bool = True,
            check: bool = False) -> RunResult:
    """Run the SAV scenario; ``check`` asserts dispatcher invariants every step."""
    return SAVSimulation(config, inputs, record_events, check).run()


def run(config: ScenarioConfig, inputs: ScenarioInputs, record_events: bool = True) -> RunResult:
    if config.scenario == "baseline":
        return run_baseline(config, inputs, record_events)
    return run_sav(config, inputs, record_events)


# -- comparison ----------------------------------------------------------------

@dataclass
class ReportBundle:
    files: dict  # file name -> text

    def write(self, directory) -> None:
        from pathlib import Path
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name, text in sorted(self.files.items()):
            (d / name).write_text(text)


def _fmt_float(x, nd=6):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{x:.{nd}f}"


def compare(baseline: RunResult, sav: RunResult, far: float = 2.0) -> ReportBundle:
    """Parking-by-land-use and traffic-total reports, per-zone differences and correlations."""
    from .io import rows_to_csv_text

    if baseline.fingerprint != sav.fingerprint:
        raise InputMismatchError("baseline and SAV runs were made on different inputs")
    if baseline.scenario != "baseline" or sav.scenario != "sav":
        logger.warning("compare called with scenarios %s / %s", baseline.scenario, sav.scenario)
    zones = baseline.zone_info
    diff = scenario_diff(sav.metrics, sav.parking_slots, baseline.metrics, baseline.parking_slots)

    files = {}
    diff_csv = rows_to_csv_text(diff.rows(), ["zone_id", "d_parking", "d_vkt", "d_delay_time", "d_avg_speed"])
    names, corr = correlation_matrix({
        "d_parking": diff.parking, "d_vkt": diff.vkt, "d_delay_time": diff.delay_time,
        "d_avg_speed": np.nan_to_num(diff.avg_speed),
    })
    block = ["", "# spearman correlation", "variable," + ",".join(names)]
    for i, n in enumerate(names):
        block.append(n + "," + ",".join("undefined" if math.isnan(c) else f"{c:.6f}" for c in corr[i]))
    files["diff.csv"] = diff_csv + "\n".join(block) + "\n"

    base_slots = np.asarray(baseline.parking_slots, dtype=float)
    sav_slots = np.asarray(sav.parking_slots, dtype=float)
    rows = []
    for i, z in enumerate(zones):
        red = base_slots[i] - sav_slots[i]
        area = z["area_m2"]
        rows.append({
            "zone_id": z["zone_id"],
            "baseline_slots": int(base_slots[i]),
            "sav_slots": int(sav_slots[i]),
            "reduction": int(red),
            "reduction_pct": _fmt_float(100 * red / base_slots[i] if base_slots[i] else float("nan"), 3),
            "baseline_area_m2": _fmt_float(pk.slots_to_area(base_slots[i]), 1),
            "sav_area_m2": _fmt_float(pk.slots_to_area(sav_slots[i]), 1),
            "freed_pct_of_zone": _fmt_float(100 * red * pk.SLOT_AREA_M2 / area if area else float("nan"), 3),
        })
    files["parking_report.csv"] = rows_to_csv_text(rows, list(rows[0]) if rows else None)

    t2 = []
    total_area = total_base = total_sav = 0.0
    for kind in LAND_USE_TYPES:
        idx = [i for i, z in enumerate(zones) if z["dominant_use"] == kind]
        area = sum(zones[i]["area_m2"] for i in idx)
        b = float(base_slots[idx].sum()) if idx else 0.0
        s = float(sav_slots[idx].sum()) if idx else 0.0
        total_area += area
        total_base += b
        total_sav += s
        t2.append(_land_use_row(kind, area, b, s))
    t2.append(_land_use_row("total", total_area, total_base, total_sav))
    files["parking_by_land_use.csv"] = rows_to_csv_text(t2, list(t2[0]))

    t3 = []
    labels = {"vkt": "VKT [veh x km]", "delay_time": "Delay time [veh x h]", "avg_speed": "Average travel speed [km/h]"}
    for key, label in labels.items():
        tot = diff.totals[key]
        fmt = "{:,.1f}" if key == "avg_speed" else "{:,.0f}"
        t3.append({"measure": label, "sav": fmt.format(tot["sav"]) + " " + tot["change"],
                   "current": fmt.format(tot["baseline"]), "sav_value": _fmt_float(tot["sav"]),
                   "current_value": _fmt_float(tot["baseline"])})
    files["traffic_totals.csv"] = rows_to_csv_text(t3, list(t3[0]))

    registered = baseline.config.registered_vehicles
    dec = None
    if total_base >= total_sav:
        dec = pk.decompose_reduction(total_base, total_sav, sav.config.fleet_size, registered)
    files["decomposition.json"] = json.dumps(
        None if dec is None else {k: (float(v) if not isinstance(v, bool) else v)
                                  for k, v in dataclasses.asdict(dec).items()}, indent=1, sort_keys=True) + "\n"
    files["correlation.json"] = json.dumps(
        {"variables": names, "matrix": [[None if math.isnan(c) else round(float(c), 12) for c in row] for row in corr]},
        indent=1) + "\n"
    if sav.desire_lines is not None:
        files["desire_lines.geojson"] = json.dumps(sav.desire_lines, indent=1, sort_keys=True) + "\n"
    summary = {"fingerprint": baseline.fingerprint,
               "totals": {k: {kk: (vv if isinstance(vv, str) else round(float(vv), 9)) for kk, vv in v.items()}
                          for k, v in diff.totals.items()},
               "baseline": _clean(baseline.summary), "sav": _clean(sav.summary)}
    files["summary.json"] = json.dumps(summary, indent=1, sort_keys=True) + "\n"
    return ReportBundle(files)


def _land_use_row(kind, area, base, sav):
    ratio = lambda s: f"{100 * pk.slots_to_area(s) / area:.1f}%" if area else "-"
    return {"zone_type": kind, "area_km2": f"{area / 1e6:.2f}", "current_slots": int(base),
            "current_ratio": ratio(base), "sav_slots": int(sav), "sav_ratio": ratio(sav),
            "current": f"{int(base):,} ({ratio(base)})", "sav": f"{int(sav):,} ({ratio(sav)})"}


def _clean(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, (float, np.floating)):
            v = float(v)
            out[k] = None if math.isnan(v) else round(v, 9)
        elif isinstance(v, (np.integer,)):
            out[k] = int(v)
        else:
            out[k] = v
    return out


def sweep(config: ScenarioConfig, inputs: ScenarioInputs, fleet_sizes: Sequence[int], jobs: int = 1) -> list[dict]:
    """Mean wait per fleet size, the manual fleet-sizing procedure."""
    configs = [dataclasses.replace(config, scenario="sav", fleet_size=int(n)) for n in fleet_sizes]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_sweep_point, configs, [inputs] * len(configs)))
    else:
        results = [_sweep_point(c, inputs) for c in configs]
    return results


def _sweep_point(config, inputs):
    res = run_sav(config, inputs, record_events=False)
    s = res.summary
    return {"fleet_size": config.fleet_size, "wait_mean_s": s["wait_mean_s"], "wait_p95_s": s["wait_p95_s"],
            "waitlisted_in_window": s["waitlisted_in_window"], "unserved_at_end": s["unserved_at_end"],
            "fleet_empty_km": s["fleet_empty_km"]}


# -- run directories -------------------------------------------------------------

def write_run(result: RunResult, directory, network: Network | None = None, events_format: str = "csv") -> None:
    """Persist a run so that :func:`compare` can be called on it later."""
    from pathlib import Path

    from .io import rows_to_csv_text, write_events_binary, write_events_csv

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.txt").write_text(result.config.to_text())
    (d / "fingerprint.txt").write_text(result.fingerprint + "\n")
    (d / "summary.json").write_text(json.dumps(_clean(result.summary), indent=1, sort_keys=True) + "\n")
    (d / "metrics.csv").write_text(rows_to_csv_text(result.metrics.rows()))
    zone_rows = [dict(z, parking_slots=int(result.parking_slots[i])) for i, z in enumerate(result.zone_info)]
    (d / "zones.csv").write_text(rows_to_csv_text(zone_rows))
    if result.parking_estimate is not None:
        e = result.parking_estimate
        rows = [{"zone_id": z, "facility_slots": e.facility_slots[i], "garage_slots": e.garage_slots[i],
                 "arrivals": e.arrivals[i], "final_slots": int(e.final_slots[i])} for i, z in enumerate(e.zone_ids)]
        (d / "parking.csv").write_text(rows_to_csv_text(rows))
    if result.dispatch_log:
        cols = ["time_s", "event", "vehicle_id", "request_id", "from_zone", "to_zone", "eta_s"]
        (d / "dispatch_log.csv").write_text(rows_to_csv_text([dict(zip(cols, r)) for r in result.dispatch_log], cols))
    if result.waitlist_series:
        (d / "waitlist.csv").write_text(rows_to_csv_text(
            [{"time_s": t, "waitlisted": n} for t, n in result.waitlist_series]))
    if result.requests:
        cols = ["id", "origin_zone", "dest_zone", "generation_time", "assignment_time", "pickup_time",
                "arrival_time", "state", "vehicle_id"]
        zids = result.metrics.zone_ids
        rows = [{"id": r.id, "origin_zone": zids[r.origin], "dest_zone": zids[r.dest],
                 "generation_time": r.generation_time, "assignment_time": r.assignment_time,
                 "pickup_time": r.pickup_time, "arrival_time": r.arrival_time, "state": r.state.value,
                 "vehicle_id": r.vehicle} for r in result.requests]
        (d / "requests.csv").write_text(rows_to_csv_text(rows, cols))
    if result.desire_lines is not None:
        (d / "desire_lines.geojson").write_text(json.dumps(result.desire_lines, indent=1, sort_keys=True) + "\n")
    if result.events is not None and network is not None:
        if events_format == "binary":
            with open(d / "events.bin", "wb") as f:
                write_events_binary(result.events, network, f)
        else:
            with open(d / "events.csv", "w", newline="") as f:
                write_events_csv(result.events, network, f)


def load_run(directory) -> RunResult:
    """Read back the parts of a run directory that :func:`compare` needs."""
    import csv
    from pathlib import Path

    from .io import parse_id

    d = Path(directory)
    if not (d / "summary.json").exists():
        raise FileNotFoundError(f"{d} is not a run directory (summary.json missing)")
    config = ScenarioConfig.from_file(d / "config.txt")
    summary = json.loads((d / "summary.json").read_text())
    with open(d / "metrics.csv", newline="") as f:
        rows = [dict(r, zone_id=parse_id(r["zone_id"])) for r in csv.DictReader(f)]
    metrics = ZoneMetrics.from_rows(rows)
    with open(d / "zones.csv", newline="") as f:
        zrows = list(csv.DictReader(f))
    zone_info, slots = [], []
    for r in zrows:
        info = {"zone_id": parse_id(r["zone_id"]), "dominant_use": r["dominant_use"], "area_m2": float(r["area_m2"])}
        info.update({f"{k}_m2": float(r[f"{k}_m2"]) for k in LAND_USE_TYPES})
        zone_info.append(info)
        slots.append(int(r["parking_slots"]))
    desire = None
    if (d / "desire_lines.geojson").exists():
        desire = json.loads((d / "desire_lines.geojson").read_text())
    return RunResult(summary.get("scenario", config.scenario), config, (d / "fingerprint.txt").read_text().strip(),
                     metrics, np.array(slots, dtype=np.int64), zone_info, summary, desire_lines=desire)
