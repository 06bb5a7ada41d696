"""Small reproducible networks and demand used by the tests and demos."""
from __future__ import annotations

import numpy as np

from .demand import ODMatrix
from .network import Link, Network, Node, Zone, build_network
from .scenario import ScenarioInputs


def grid_network(n: int = 5, spacing: float = 500.0, speed_kmh: float = 36.0, capacity: float = 1800.0,
                 jam_density: float = 150.0, core_green_ratio: float = 0.5, core=None) -> Network:
    """``n`` x ``n`` grid of two-way links, one zone and station per node.

    Zone ``r*n + c`` sits on node ``(r, c)``. Links leaving a core node get
    ``core_green_ratio`` to mimic signalised downtown intersections. The
    centre 3x3 block is core by default.
    """
    if core is None:
        lo, hi = (n - 3) // 2, (n - 3) // 2 + 3
        core = {r * n + c for r in range(lo, hi) for c in range(lo, hi)}
    nodes = [Node(r * n + c, c * spacing, r * spacing) for r in range(n) for c in range(n)]
    links = []
    for r in range(n):
        for c in range(n):
            a = r * n + c
            for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < n and 0 <= cc < n:
                    b = rr * n + cc
                    links.append(Link(f"{a}-{b}", a, b, spacing, 1, speed_kmh, capacity, jam_density,
                                      core_green_ratio if a in core else 1.0, 0.0, a))
    zones = []
    for r in range(n):
        for c in range(n):
            z = r * n + c
            nbrs = tuple(rr * n + cc for rr, cc in ((r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c))
                         if 0 <= rr < n and 0 <= cc < n)
            zones.append(Zone(z, z, _land_use(z in core, r, c, n), 0.0 if z in core else 400.0, nbrs))
    return build_network(nodes, links, zones)


def _land_use(is_core, r, c, n):
    if is_core:
        if (r + c) % 2 == 0:
            return {"office": 36_000.0, "commerce": 12_000.0, "residence": 20_000.0, "transport": 2_000.0}
        return {"commerce": 27_000.0, "office": 15_000.0, "residence": 40_000.0}
    edge = r in (0, n - 1) or c in (0, n - 1)
    corner = r in (0, n - 1) and c in (0, n - 1)
    if corner:
        return {"nature": 150_000.0, "residence": 60_000.0, "park": 20_000.0}
    if edge and (r + c) % 2:
        return {"residence": 160_000.0, "industry": 10_000.0, "commerce": 2_000.0}
    return {"residence": 180_000.0, "commerce": 3_000.0, "park": 15_000.0}


def grid_demand(network: Network, trips_per_hour=None, seed: int = 7) -> ODMatrix:
    """Morning-peak OD: homes on the ring send trips to the core.

    ``trips_per_hour`` maps hour of day to the total trips in that hour;
    the default puts 2,500 trips in each of hours 7 and 8 and a lighter
    shoulder before. Cell weights are fixed by ``seed``.
    """
    if trips_per_hour is None:
        trips_per_hour = {6: 1200.0, 7: 2500.0, 8: 2500.0}
    nz = network.n_zones
    rng = np.random.default_rng(seed)
    households = np.array([z.households for z in network.zones])
    office = np.array([z.land_use_areas.get("office", 0.0) + z.land_use_areas.get("commerce", 0.0)
                       for z in network.zones])
    w = np.outer(households + 40.0, office + 6_000.0) * rng.uniform(0.7, 1.3, (nz, nz))
    np.fill_diagonal(w, 0.0)
    w /= w.sum()
    trips = np.zeros((24, nz, nz))
    for h, total in trips_per_hour.items():
        trips[h] = w * total
    return ODMatrix(trips, tuple(z.id for z in network.zones))


def grid_inputs(**kwargs) -> ScenarioInputs:
    net = grid_network(**{k: v for k, v in kwargs.items() if k != "trips_per_hour" and k != "seed"})
    od = grid_demand(net, kwargs.get("trips_per_hour"), kwargs.get("seed", 7))
    return ScenarioInputs(net, od)


# registered vehicles for the grid; puts the turnover fit near 1.7 with default demand
GRID_REGISTERED_VEHICLES = 500.0


def bottleneck_network(upstream_m: float = 5000.0, bottleneck_m: float = 1000.0, capacity: float = 1800.0,
                       green_ratio: float = 0.5) -> Network:
    """Two links in series; the second keeps ``green_ratio`` of its capacity.

    The upstream link has two lanes so the queue fits on it without
    spilling past its entrance.
    """
    nodes = [Node("A", 0.0, 0.0), Node("B", upstream_m, 0.0), Node("C", upstream_m + bottleneck_m, 0.0)]
    links = [
        Link("up", "A", "B", upstream_m, 2, 60.0, capacity, 150.0, 1.0, 0.0, "z1"),
        Link("neck", "B", "C", bottleneck_m, 1, 60.0, capacity, 150.0, green_ratio, 0.0, "z2"),
    ]
    zones = [Zone("z1", "A", {"office": 1.0}, 1.0, ("z2",)), Zone("z2", "C", {"office": 1.0}, 1.0, ("z1",))]
    return build_network(nodes, links, zones)


def merge_network(length: float = 1000.0, capacity: float = 1800.0, downstream_capacity: float = 1800.0,
                  jam_density: float = 150.0) -> Network:
    """Two one-lane approaches merging into a single downstream link."""
    nodes = [Node("a", 0.0, 0.0), Node("b", 0.0, 2 * length), Node("m", length, length),
             Node("d", 2 * length, length)]
    links = [
        Link("a-m", "a", "m", length, 1, 60.0, capacity, jam_density, 1.0, 0.0, "za"),
        Link("b-m", "b", "m", length, 1, 60.0, capacity, jam_density, 1.0, 0.0, "zb"),
        Link("m-d", "m", "d", length, 1, 60.0, downstream_capacity, jam_density, 1.0, 0.0, "zd"),
    ]
    zones = [Zone("za", "a", {"residence": 1.0}, 1.0, ("zd",)), Zone("zb", "b", {"residence": 1.0}, 1.0, ("zd",)),
             Zone("zd", "d", {"office": 1.0}, 1.0, ("za", "zb"))]
    return build_network(nodes, links, zones)

# fleet that brings the mean wait on the default grid to about a minute
GRID_FLEET_SIZE = 300
