"""Mesoscopic network loading: link transmission model on a triangular
fundamental diagram with discrete vehicles, physical queues and spillback.

Vehicles move atomically between links. Each link keeps cumulative counts
at both ends; the sending flow looks back one free-flow traversal time on
the upstream count, the receiving flow looks back one backward-wave time on
the downstream count. Fractional capacity per step is carried in per-link
credit accumulators.
"""
from __future__ import annotations

import heapq
import math
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass
from itertools import islice
from typing import Mapping, Sequence

import numpy as np

from .network import Link, Network
from .routing import Route, TravelTimeTable

SINK = -1
ENTER = 0
EXIT = 1
_EPS = 1e-9


class LinkState:
    """Cumulative in/out counts and the FIFO queue of one link.

    ``queue`` holds ``(vehicle_id, entry_time)`` pairs in entry order.
    ``exits`` holds recent exit times, enough to evaluate the outflow count
    one backward-wave time in the past.
    """

    __slots__ = ("n_in", "n_out", "queue", "exits", "exit_lo", "out_credit", "out_credit_time",
                 "in_credit", "in_credit_time", "tt_sum", "tt_count")

    def __init__(self):
        self.n_in = 0
        self.n_out = 0
        self.queue = deque()
        self.exits = []
        self.exit_lo = 0
        self.out_credit = None
        self.out_credit_time = -math.inf
        self.in_credit = None
        self.in_credit_time = -math.inf
        self.tt_sum = 0.0
        self.tt_count = 0

    @property
    def on_link(self) -> int:
        return self.n_in - self.n_out

    def cum_in_at(self, s: float) -> int:
        """N_in(s), valid for s no earlier than the entry time of the last exited vehicle."""
        n = self.n_out
        for _, entry in self.queue:
            if entry > s:
                break
            n += 1
        return n

    def cum_out_at(self, s: float) -> int:
        """N_out(s), valid within the retained exit window."""
        return self.n_out - (len(self.exits) - bisect_right(self.exits, s, self.exit_lo))


def link_sending_flow(link: Link, state: LinkState, t: float, dt: float) -> float:
    """Vehicles ready to leave during ``[t, t+dt)``, bounded by capacity."""
    ready = state.cum_in_at(t + dt - link.free_flow_time) - state.n_out
    return max(0.0, min(float(ready), link.effective_capacity * dt))


def link_receiving_flow(link: Link, state: LinkState, t: float, dt: float) -> float:
    """Vehicles the link can accept during ``[t, t+dt)``.

    Free space propagates back from the downstream end at the backward wave
    speed, so room freed at time s becomes usable upstream at s + L/|w|.
    """
    s = min(t + dt - link.backward_wave_time, t)
    room = state.cum_out_at(s) + link.storage - state.n_in
    return max(0.0, min(room, link.inflow_capacity * dt))


def node_transfer(demands: Mapping[int, Mapping[int, int]], receiving: Mapping[int, int],
                  carry: dict | None = None) -> dict:
    """Ration integer movement demands against integer receiving budgets.

    ``demands[i][j]`` is the number of vehicles on incoming link ``i`` that
    want outgoing link ``j``. Outgoing links absent from ``receiving`` (such
    as :data:`SINK`) are unconstrained. An oversubscribed outgoing link is
    shared in proportion to demand, with leftover units going to the largest
    fractional shares (lower incoming index first on ties).

    ``carry`` keeps each movement's unrounded entitlement minus what it was
    given, keyed by ``(i, j)``, and is updated in place. Adding it to the
    fractional shares makes rounding fair over time: without it two
    approaches competing for one vehicle per step would always resolve the
    same way.
    """
    totals: dict = {}
    for i, row in demands.items():
        for j, d in row.items():
            if d > 0:
                totals[j] = totals.get(j, 0) + d
    out = {}
    for j, total in totals.items():
        cap = receiving.get(j)
        if cap is None or total <= cap:
            for i, row in demands.items():
                if row.get(j, 0) > 0:
                    out[(i, j)] = row[j]
                    if carry is not None:
                        carry.pop((i, j), None)
            continue
        cap = max(int(cap), 0)
        shares = []
        exact = {}
        given = 0
        for i in sorted(demands):
            d = demands[i].get(j, 0)
            if d <= 0:
                continue
            e = exact[i] = cap * d / total
            base = int(math.floor(e))
            out[(i, j)] = base
            given += base
            owed = carry.get((i, j), 0.0) if carry is not None else 0.0
            shares.append((-(e - base + owed), i))
        shares.sort()
        for _, i in shares:
            if given >= cap:
                break
            if out[(i, j)] < demands[i][j]:
                out[(i, j)] += 1
                given += 1
        if carry is not None:
            for i, e in exact.items():
                carry[(i, j)] = carry.get((i, j), 0.0) + e - out[(i, j)]
    return out


def choose_route(routes: Sequence[Route], theta: float, rng: np.random.Generator) -> int:
    """Sample a route index with multinomial logit probabilities exp(-theta * cost)."""
    if not routes:
        raise ValueError("empty choice set")
    if len(routes) == 1:
        return 0
    return int(rng.choice(len(routes), p=logit_probabilities([r.cost for r in routes], theta)))


def logit_probabilities(costs: Sequence[float], theta: float) -> np.ndarray:
    costs = np.asarray(costs, dtype=float)
    if math.isinf(theta):
        p = (costs == costs.min()).astype(float)
        p[np.argmax(p) + 1:] = 0.0
        return p
    w = np.exp(-theta * (costs - costs.min()))
    return w / w.sum()


@dataclass
class FlowClock:
    """Simulation clock; every cadence must be a whole number of steps."""

    t: float = 0.0
    dt: float = 1.0
    horizon: float = math.inf

    def steps(self, period: float) -> int:
        n = round(period / self.dt)
        if n < 1 or abs(n * self.dt - period) > 1e-9:
            raise ValueError(f"period {period} is not a multiple of dt={self.dt}")
        return n

    def due(self, period: float) -> bool:
        return round(self.t / self.dt) % self.steps(period) == 0


class _Vehicle:
    __slots__ = ("vid", "route", "pos", "ready", "empty", "seq", "entry")

    def __init__(self, vid, route, ready, empty, seq):
        self.vid = vid
        self.route = route
        self.pos = -1
        self.entry = None
        self.ready = ready
        self.empty = empty
        self.seq = seq


@dataclass(frozen=True)
class Traversal:
    vehicle: int
    link: int
    enter: float
    exit: float
    empty: bool


class FlowModel:
    """Discrete-vehicle link transmission model.

    Call :meth:`depart` to schedule a vehicle along a route and
    :meth:`advance` to move the clock one step. ``advance`` returns the
    vehicles that completed their route as ``(vehicle_id, node, time)``.
    Vehicles whose departure time has come are injected at their origin
    before through movements are served in the same step.
    """

    def __init__(self, network: Network, dt: float = 1.0, start: float = 0.0, record_events: bool = True):
        self.network = network
        self.clock = FlowClock(start, dt)
        self.states = [LinkState() for _ in network.links]
        links = network.links
        self._ff = [l.free_flow_time for l in links]
        self._bw = [l.backward_wave_time for l in links]
        self._rate = [l.effective_capacity for l in links]
        self._ceiling = [max(1.0, l.effective_capacity * dt) for l in links]
        self._in_rate = [l.inflow_capacity for l in links]
        self._in_ceiling = [max(1.0, l.inflow_capacity * dt) for l in links]
        self._storage = [l.storage for l in links]
        self._to = network.link_to.tolist()
        self._from = network.link_from.tolist()
        self.vehicles: dict = {}
        self._pending = []
        self._buffers: dict = {}
        self._active = set()
        self._seq = 0
        self.record_events = record_events
        self.events: list = []
        self._carry: list = []
        self._owed: dict = {}
        self.traversals: list = []
        self.injected = 0
        self.retired = 0

    @property
    def t(self) -> float:
        return self.clock.t

    # -- vehicle management -------------------------------------------------

    def depart(self, vid, links: Sequence[int], ready: float | None = None, empty: bool = False) -> None:
        """Schedule ``vid`` to enter ``links[0]`` at ``ready`` (default: now)."""
        if not links:
            raise ValueError("route has no links")
        if vid in self.vehicles:
            raise ValueError(f"vehicle {vid!r} already in the flow model")
        ready = self.t if ready is None else ready
        self._seq += 1
        veh = _Vehicle(vid, list(links), ready, empty, self._seq)
        self.vehicles[vid] = veh
        heapq.heappush(self._pending, (ready, self._seq, vid))

    def position(self, vid):
        """``('link', link, entry_time)`` when on a link, else ``('node', node)``."""
        veh = self.vehicles[vid]
        if veh.pos < 0:
            return ("node", self._from[veh.route[0]])
        return ("link", veh.route[veh.pos], veh.entry)

    def remaining_links(self, vid) -> list:
        """Links still to be entered (excluding the current one)."""
        veh = self.vehicles[vid]
        return veh.route[veh.pos + 1:]

    def is_waiting(self, vid) -> bool:
        return self.vehicles[vid].pos < 0

    def reroute(self, vid, links: Sequence[int], empty: bool | None = None) -> None:
        """Replace the links after the current one.

        For a vehicle still waiting at its origin the whole route is
        replaced; an empty replacement is only allowed for vehicles already
        on a link.
        """
        veh = self.vehicles[vid]
        if empty is not None:
            veh.empty = empty
        if veh.pos >= 0:
            veh.route = veh.route[: veh.pos + 1] + list(links)
            return
        if not links:
            raise ValueError("waiting vehicle needs a non-empty route; use withdraw()")
        old_first = veh.route[0]
        if links[0] != old_first:
            buf = self._buffers.get(old_first)
            if buf is not None and vid in buf:
                buf.remove(vid)
                if not buf:
                    del self._buffers[old_first]
                self._buffers.setdefault(links[0], deque()).append(vid)
        veh.route = list(links)

    def withdraw(self, vid) -> None:
        """Remove a vehicle that has not entered the network yet."""
        veh = self.vehicles[vid]
        if veh.pos >= 0:
            raise ValueError("vehicle already on the network")
        buf = self._buffers.get(veh.route[0])
        if buf is not None and vid in buf:
            buf.remove(vid)
            if not buf:
                del self._buffers[veh.route[0]]
        else:
            self._pending = [p for p in self._pending if p[2] != vid]
            heapq.heapify(self._pending)
        del self.vehicles[vid]

    def on_network(self) -> int:
        return sum(len(self.states[li].queue) for li in self._active)

    def waiting(self) -> int:
        return len(self.vehicles) - self.on_network()

    # -- stepping -----------------------------------------------------------

    def _receiving(self, recv, li, t, t1):
        r = recv.get(li)
        if r is not None:
            return r
        st = self.states[li]
        if st.in_credit is None:
            st.in_credit = self._in_ceiling[li]
        else:
            st.in_credit = min(self._in_ceiling[li], st.in_credit + self._in_rate[li] * (t1 - st.in_credit_time))
        st.in_credit_time = t1
        s = min(t1 - self._bw[li], t)
        idx = bisect_right(st.exits, s, st.exit_lo)
        st.exit_lo = idx
        if idx > 256 and idx * 2 > len(st.exits):
            del st.exits[:idx]
            st.exit_lo = 0
            idx = 0
        cum_out = st.n_out - (len(st.exits) - idx)
        room = cum_out + self._storage[li] - st.n_in
        r = max(0, int(math.floor(min(room, st.in_credit) + _EPS)))
        recv[li] = r
        return r

    def _enter(self, veh, li, when, recv):
        st = self.states[li]
        st.queue.append((veh.vid, when))
        veh.entry = when
        st.n_in += 1
        st.in_credit -= 1.0
        recv[li] -= 1
        self._active.add(li)
        if self.record_events:
            self._carry.append((when, veh.vid, li, ENTER, veh.empty))

    def advance(self) -> list:
        """Advance one step; return arrivals as ``(vehicle_id, node, time)``."""
        t = self.clock.t
        dt = self.clock.dt
        t1 = t + dt
        recv: dict = {}
        arrivals = []
        self.traversals = []

        # departures whose time has come join the entry buffer of their first link
        pending = self._pending
        while pending and pending[0][0] <= t + _EPS:
            _, _, vid = heapq.heappop(pending)
            veh = self.vehicles[vid]
            self._buffers.setdefault(veh.route[0], deque()).append(vid)

        for li in sorted(self._buffers):
            buf = self._buffers[li]
            room = self._receiving(recv, li, t, t1)
            while buf and room > 0:
                veh = self.vehicles[buf.popleft()]
                veh.pos = 0
                self._enter(veh, li, t, recv)
                self.injected += 1
                room -= 1
            if not buf:
                del self._buffers[li]

        # sending budgets, grouped by downstream node
        by_node: dict = {}
        for li in sorted(self._active):
            st = self.states[li]
            if st.out_credit is None:
                st.out_credit = self._ceiling[li]
            else:
                st.out_credit = min(self._ceiling[li], st.out_credit + self._rate[li] * (t1 - st.out_credit_time))
            st.out_credit_time = t1
            budget = int(st.out_credit + _EPS)
            if budget <= 0:
                continue
            horizon = t1 - self._ff[li] + _EPS
            n = 0
            for _, entry in st.queue:
                if entry > horizon or n >= budget:
                    break
                n += 1
            if n:
                by_node.setdefault(self._to[li], []).append((li, n))

        for node in sorted(by_node):
            self._transfer(node, by_node[node], t, t1, recv, arrivals)

        self._flush(t)
        self.clock.t = t1
        return arrivals

    def _next_hop(self, vid):
        veh = self.vehicles[vid]
        nxt = veh.pos + 1
        return veh.route[nxt] if nxt < len(veh.route) else SINK

    def _transfer(self, node, entries, t, t1, recv, arrivals):
        heads = {li: [vid for vid, _ in islice(self.states[li].queue, n)] for li, n in entries}
        hops = {li: [self._next_hop(v) for v in vids] for li, vids in heads.items()}
        ptr = {li: 0 for li in heads}
        first = True
        while True:
            demands = {}
            for li, hs in hops.items():
                row = {}
                for j in hs[ptr[li]:]:
                    row[j] = row.get(j, 0) + 1
                if row:
                    demands[li] = row
            if not demands:
                return
            receiving = {}
            for row in demands.values():
                for j in row:
                    if j != SINK and j not in receiving:
                        receiving[j] = self._receiving(recv, j, t, t1)
            # fairness credit only applies to the first rationing round of a step
            alloc = node_transfer(demands, receiving, self._owed if first else None)
            first = False
            moved = False
            for li in sorted(demands):
                hs = hops[li]
                k = ptr[li]
                while k < len(hs):
                    j = hs[k]
                    if j != SINK:
                        if alloc.get((li, j), 0) <= 0:
                            break
                        alloc[(li, j)] -= 1
                    self._move(li, j, node, t1, recv, arrivals)
                    k += 1
                    moved = True
                ptr[li] = k
            if not moved:
                return

    def _move(self, li, lj, node, t1, recv, arrivals):
        st = self.states[li]
        vid, entry = st.queue.popleft()
        st.n_out += 1
        st.exits.append(t1)
        st.out_credit -= 1.0
        st.tt_sum += t1 - entry
        st.tt_count += 1
        if not st.queue:
            self._active.discard(li)
        veh = self.vehicles[vid]
        if self.record_events:
            self._carry.append((t1, vid, li, EXIT, veh.empty))
        self.traversals.append(Traversal(vid, li, entry, t1, veh.empty))
        if lj == SINK:
            del self.vehicles[vid]
            self.retired += 1
            arrivals.append((vid, node, t1))
        else:
            veh.pos += 1
            self._enter(veh, lj, t1, recv)

    def _flush(self, t):
        if not self.record_events:
            return
        done = [e for e in self._carry if e[0] <= t]
        if done:
            self._carry = [e for e in self._carry if e[0] > t]
            done.sort(key=lambda e: (e[0], e[2], e[1], e[3]))
            self.events.extend(done)

    def finish(self) -> list:
        """Flush buffered events and return the full ordered event log."""
        if self.record_events and self._carry:
            self._carry.sort(key=lambda e: (e[0], e[2], e[1], e[3]))
            self.events.extend(self._carry)
            self._carry = []
        return self.events


def refresh_travel_times(model: FlowModel, table: TravelTimeTable, now: float | None = None) -> TravelTimeTable:
    """Window-mean experienced traversal times; links without exits keep their entry."""
    times = table.times.copy()
    ff = model.network.free_flow_time
    for li, st in enumerate(model.states):
        if st.tt_count:
            times[li] = max(ff[li], st.tt_sum / st.tt_count)
            st.tt_sum = 0.0
            st.tt_count = 0
    now = model.t if now is None else now
    version = table.version if np.array_equal(times, table.times) else table.version + 1
    return TravelTimeTable(times, max(now, table.timestamp), version)
