"""Minimum-travel-time routing over a frozen travel-time table."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .network import Network


@dataclass
class TravelTimeTable:
    """Per-link travel time estimates in seconds.

    ``version`` changes only when the values change, so it can key route
    caches; ``timestamp`` records when the table was last refreshed.
    """

    times: np.ndarray
    timestamp: float = 0.0
    version: int = 0

    @classmethod
    def free_flow(cls, network: Network, timestamp: float = 0.0) -> "TravelTimeTable":
        return cls(network.free_flow_time.copy(), timestamp, 0)


@dataclass(frozen=True)
class Route:
    origin: int
    dest: int
    links: tuple
    cost: float

    def __len__(self):
        return len(self.links)

    def length(self, network: Network) -> float:
        return float(sum(network.length[li] for li in self.links))


def link_costs(network: Network, table: TravelTimeTable, vot_weight: float = 0.0) -> list:
    if vot_weight:
        return (table.times + vot_weight * network.toll).tolist()
    return table.times.tolist()


def path_cost(links, costs) -> float:
    total = 0.0
    for li in links:
        total += costs[li]
    return total


def _path_to(pred, node):
    out = []
    while pred[node] is not None:
        li, node = pred[node]
        out.append(li)
    out.reverse()
    return tuple(out)


def _dijkstra(network, costs, origin, dest, banned_links=(), banned_nodes=()):
    """Label-setting search; equal-cost ties keep the lexicographically smaller link sequence."""
    n = network.n_nodes
    dist = [math.inf] * n
    pred = [None] * n
    done = [False] * n
    for b in banned_nodes:
        done[b] = True
    dist[origin] = 0.0
    heap = [(0.0, origin)]
    out_links = network.out_links
    link_to = network.link_to
    while heap:
        d, u = heapq.heappop(heap)
        if done[u] or d > dist[u]:
            continue
        done[u] = True
        if u == dest:
            break
        for li in out_links[u]:
            if li in banned_links:
                continue
            v = int(link_to[li])
            if done[v]:
                continue
            nd = d + costs[li]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = (li, u)
                heapq.heappush(heap, (nd, v))
            elif nd == dist[v] and _path_to(pred, u) + (li,) < _path_to(pred, v):
                pred[v] = (li, u)
    if not done[dest] or dist[dest] == math.inf:
        return None
    return _path_to(pred, dest)


def shortest_path(network: Network, origin: int, dest: int, table: TravelTimeTable,
                  vot_weight: float = 0.0) -> Route | None:
    """Route minimising the sum of ``table`` times plus ``vot_weight`` x toll.

    Node arguments are node indices. Returns ``None`` when ``dest`` cannot be
    reached; an origin equal to the destination gives an empty zero-cost route.
    """
    costs = link_costs(network, table, vot_weight)
    links = _dijkstra(network, costs, origin, dest)
    if links is None:
        return None
    return Route(origin, dest, links, path_cost(links, costs))


def k_shortest_routes(network: Network, origin: int, dest: int, table: TravelTimeTable, k: int = 3,
                      vot_weight: float = 0.0) -> list[Route]:
    """Up to ``k`` loopless routes in nondecreasing cost (Yen's algorithm)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    costs = link_costs(network, table, vot_weight)
    first = _dijkstra(network, costs, origin, dest)
    if first is None:
        return []
    found = [first]
    seen = {first}
    candidates = []
    while len(found) < k:
        prev = found[-1]
        prev_nodes = [origin] + [int(network.link_to[li]) for li in prev]
        for i in range(len(prev)):
            spur = prev_nodes[i]
            root = prev[:i]
            banned_links = {p[i] for p in found if len(p) > i and p[:i] == root}
            spur_links = _dijkstra(network, costs, spur, dest, banned_links, prev_nodes[:i])
            if spur_links is None:
                continue
            total = root + spur_links
            if total not in seen:
                seen.add(total)
                heapq.heappush(candidates, (path_cost(total, costs), total))
        if not candidates:
            break
        _, best = heapq.heappop(candidates)
        found.append(best)
    return [Route(origin, dest, p, path_cost(p, costs)) for p in found]


def times_to(network: Network, target: int, table: TravelTimeTable) -> np.ndarray:
    """Minimum travel time from every node to ``target`` (inf when unreachable)."""
    costs = table.times
    dist = np.full(network.n_nodes, math.inf)
    dist[target] = 0.0
    heap = [(0.0, target)]
    in_links = network.in_links
    link_from = network.link_from
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for li in in_links[u]:
            v = link_from[li]
            nd = d + costs[li]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, int(v)))
    return dist


class RouteCache:
    """Caches choice sets and reverse time trees per table version."""

    def __init__(self, network: Network, k: int = 3, vot_weight: float = 0.0):
        self.network = network
        self.k = k
        self.vot_weight = vot_weight
        self._version = None
        self._routes = {}
        self._trees = {}

    def _sync(self, table):
        if table.version != self._version:
            self._version = table.version
            self._routes.clear()
            self._trees.clear()

    def routes(self, origin: int, dest: int, table: TravelTimeTable) -> list[Route]:
        self._sync(table)
        key = (origin, dest)
        if key not in self._routes:
            self._routes[key] = k_shortest_routes(self.network, origin, dest, table, self.k, self.vot_weight)
        return self._routes[key]

    def times_to(self, target: int, table: TravelTimeTable) -> np.ndarray:
        self._sync(table)
        tree = self._trees.get(target)
        if tree is None:
            tree = self._trees[target] = times_to(self.network, target, table)
        return tree
