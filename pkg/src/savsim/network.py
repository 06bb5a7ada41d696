"""Road network and zone system.

Links carry triangular fundamental diagram parameters; zones carry land use,
household counts and the node hosting their SAV station.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

LAND_USE_TYPES = ("office", "commerce", "residence", "industry", "park", "transport", "nature")


class NetworkError(ValueError):
    """Raised for malformed or inconsistent network input."""


@dataclass(frozen=True)
class Node:
    id: Hashable
    x: float
    y: float


@dataclass(frozen=True)
class Link:
    """Directed road segment.

    Parameters
    ----------
    length : float
        Meters.
    free_flow_speed : float
        km/h.
    capacity : float
        Vehicles per hour per lane.
    jam_density : float
        Vehicles per km per lane.
    green_ratio : float
        Share of time the downstream signal is green; scales capacity.
    """

    id: Hashable
    from_node: Hashable
    to_node: Hashable
    length: float
    lanes: int = 1
    free_flow_speed: float = 50.0
    capacity: float = 1800.0
    jam_density: float = 150.0
    green_ratio: float = 1.0
    toll: float = 0.0
    zone_id: Hashable = None

    @property
    def free_flow_time(self) -> float:
        """Seconds to traverse at free-flow speed."""
        return self.length * 3.6 / self.free_flow_speed

    @property
    def effective_capacity(self) -> float:
        """Discharge capacity of the whole link in vehicles per second."""
        return self.capacity * self.lanes * self.green_ratio / 3600.0

    @property
    def inflow_capacity(self) -> float:
        """Entry capacity in vehicles per second; the signal only meters the exit."""
        return self.capacity * self.lanes / 3600.0

    @property
    def wave_speed(self) -> float:
        """Backward wave speed in m/s (negative)."""
        critical = self.capacity / self.free_flow_speed
        return -(self.capacity / (self.jam_density - critical)) / 3.6

    @property
    def backward_wave_time(self) -> float:
        return self.length / abs(self.wave_speed)

    @property
    def storage(self) -> float:
        """Vehicles the link holds at jam density."""
        return self.jam_density * self.length / 1000.0 * self.lanes


@dataclass(frozen=True)
class Zone:
    id: Hashable
    station_node: Hashable
    land_use_areas: Mapping[str, float] = field(default_factory=dict)
    households: float = 0.0
    neighbors: tuple = ()

    @property
    def area(self) -> float:
        return float(sum(self.land_use_areas.values()))

    def dominant_land_use(self) -> str:
        """Land-use type with the largest area; ties go to the earlier type in LAND_USE_TYPES."""
        best = LAND_USE_TYPES[0]
        best_area = -1.0
        for kind in LAND_USE_TYPES:
            a = self.land_use_areas.get(kind, 0.0)
            if a > best_area:
                best, best_area = kind, a
        return best


def _sort_key(ident):
    return (0, ident, "") if isinstance(ident, (int, np.integer)) else (1, 0, str(ident))


class Network:
    """Validated, read-only network with integer indices.

    Links are indexed in ascending id order, so comparing tuples of link
    indices is the same as comparing link-id sequences.
    """

    def __init__(self, nodes: Sequence[Node], links: Sequence[Link], zones: Sequence[Zone]):
        self.nodes = sorted(nodes, key=lambda n: _sort_key(n.id))
        self.links = sorted(links, key=lambda l: _sort_key(l.id))
        self.zones = sorted(zones, key=lambda z: _sort_key(z.id))
        self.node_index = {n.id: i for i, n in enumerate(self.nodes)}
        self.link_index = {l.id: i for i, l in enumerate(self.links)}
        self.zone_index = {z.id: i for i, z in enumerate(self.zones)}
        self.warnings: list[str] = []

        n_nodes = len(self.nodes)
        self.link_from = np.array([self.node_index[l.from_node] for l in self.links], dtype=np.int64)
        self.link_to = np.array([self.node_index[l.to_node] for l in self.links], dtype=np.int64)
        self.length = np.array([l.length for l in self.links], dtype=float)
        self.free_flow_time = np.array([l.free_flow_time for l in self.links], dtype=float)
        self.toll = np.array([l.toll for l in self.links], dtype=float)
        self.link_zone = np.array([self.zone_index.get(l.zone_id, -1) for l in self.links], dtype=np.int64)
        self.out_links: list[list[int]] = [[] for _ in range(n_nodes)]
        self.in_links: list[list[int]] = [[] for _ in range(n_nodes)]
        for i in range(len(self.links)):
            self.out_links[self.link_from[i]].append(i)
            self.in_links[self.link_to[i]].append(i)
        self.station_nodes = np.array([self.node_index[z.station_node] for z in self.zones], dtype=np.int64)
        # station node -> zone index (first zone wins if two share a node)
        self.node_zone = np.full(n_nodes, -1, dtype=np.int64)
        for zi in range(len(self.zones) - 1, -1, -1):
            self.node_zone[self.station_nodes[zi]] = zi

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def n_zones(self) -> int:
        return len(self.zones)

    def zone(self, zone_id) -> Zone:
        return self.zones[self.zone_index[zone_id]]

    def reachable_from(self, node: int) -> np.ndarray:
        """Boolean mask of nodes reachable from ``node`` (node index)."""
        seen = np.zeros(self.n_nodes, dtype=bool)
        seen[node] = True
        queue = deque([node])
        while queue:
            u = queue.popleft()
            for li in self.out_links[u]:
                v = self.link_to[li]
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        return seen

    def station_reachability(self) -> np.ndarray:
        """``R[i, j]`` is True when zone j's station is reachable from zone i's station."""
        out = np.zeros((self.n_zones, self.n_zones), dtype=bool)
        for zi, node in enumerate(self.station_nodes):
            out[zi] = self.reachable_from(node)[self.station_nodes]
        return out

    def check_demand_reachability(self, pairs: Iterable[tuple[int, int]]) -> None:
        """Raise if any (origin zone index, dest zone index) pair with demand is disconnected."""
        reach = self.station_reachability()
        bad = [(self.zones[o].id, self.zones[d].id) for o, d in pairs if not reach[o, d]]
        if bad:
            raise NetworkError(f"unreachable station pairs with demand: {bad[:10]}")


def build_network(nodes: Iterable[Node], links: Iterable[Link], zones: Iterable[Zone]) -> Network:
    """Validate records and build a :class:`Network`.

    Unreachable stations are collected in ``Network.warnings``; they only
    become fatal once demand is attached (see
    :meth:`Network.check_demand_reachability`).
    """
    nodes = list(nodes)
    links = list(links)
    zones = list(zones)

    node_ids = set()
    for n in nodes:
        if n.id in node_ids:
            raise NetworkError(f"duplicate node id {n.id!r}")
        if not (math.isfinite(n.x) and math.isfinite(n.y)):
            raise NetworkError(f"node {n.id!r} has non-finite coordinates")
        node_ids.add(n.id)

    zone_ids = set()
    for z in zones:
        if z.id in zone_ids:
            raise NetworkError(f"duplicate zone id {z.id!r}")
        zone_ids.add(z.id)

    link_ids = set()
    for l in links:
        if l.id in link_ids:
            raise NetworkError(f"duplicate link id {l.id!r}")
        link_ids.add(l.id)
        for end in (l.from_node, l.to_node):
            if end not in node_ids:
                raise NetworkError(f"link {l.id!r} references unknown node {end!r}")
        if l.zone_id is None or l.zone_id not in zone_ids:
            raise NetworkError(f"link {l.id!r} references unknown zone {l.zone_id!r}")
        if not l.length > 0:
            raise NetworkError(f"link {l.id!r}: length must be positive")
        if not l.free_flow_speed > 0:
            raise NetworkError(f"link {l.id!r}: free-flow speed must be positive")
        if not l.capacity > 0:
            raise NetworkError(f"link {l.id!r}: capacity must be positive")
        if int(l.lanes) != l.lanes or l.lanes < 1:
            raise NetworkError(f"link {l.id!r}: lanes must be an integer >= 1")
        if not 0 < l.green_ratio <= 1:
            raise NetworkError(f"link {l.id!r}: green ratio must lie in (0, 1]")
        if l.toll < 0:
            raise NetworkError(f"link {l.id!r}: negative toll")
        if not l.jam_density > l.capacity / l.free_flow_speed:
            raise NetworkError(f"link {l.id!r}: jam density must exceed critical density")
        if l.storage < 1:
            raise NetworkError(f"link {l.id!r}: storage below one vehicle")

    for z in zones:
        if z.station_node not in node_ids:
            raise NetworkError(f"zone {z.id!r} station references unknown node {z.station_node!r}")
        for kind, area in z.land_use_areas.items():
            if kind not in LAND_USE_TYPES:
                raise NetworkError(f"zone {z.id!r}: unknown land-use type {kind!r}")
            if area < 0:
                raise NetworkError(f"zone {z.id!r}: negative {kind} area")
        if z.households < 0:
            raise NetworkError(f"zone {z.id!r}: negative household count")
        for nb in z.neighbors:
            if nb not in zone_ids:
                raise NetworkError(f"zone {z.id!r} lists unknown neighbor {nb!r}")

    by_id = {z.id: z for z in zones}
    for z in zones:
        for nb in z.neighbors:
            if z.id not in by_id[nb].neighbors:
                raise NetworkError(f"neighbor relation not symmetric: {z.id!r} -> {nb!r}")

    net = Network(nodes, links, zones)
    if net.n_zones > 1:
        reach = net.station_reachability()
        np.fill_diagonal(reach, False)
        for zi, z in enumerate(net.zones):
            if not reach[:, zi].any():
                net.warnings.append(f"station of zone {z.id!r} unreachable from every other station")
    return net
