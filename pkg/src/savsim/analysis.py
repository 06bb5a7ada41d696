"""Zone-level traffic metrics, scenario differences and rank correlations."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .flow import ENTER, EXIT
from .network import Network


# traversals slower than free flow by less than this count as undelayed
_TIME_EPS = 1e-9


class UnmatchedEventError(ValueError):
    pass


@dataclass
class ZoneMetrics:
    """Per-zone totals. Distances in km, times in vehicle-hours."""

    zone_ids: tuple
    vkt: np.ndarray
    empty_vkt: np.ndarray
    delay_time: np.ndarray
    free_flow_time: np.ndarray
    travel_time: np.ndarray
    traversals: np.ndarray

    @property
    def avg_speed(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.travel_time > 0, self.vkt / self.travel_time, np.nan)

    @property
    def delay_ratio(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.free_flow_time > 0, self.delay_time / self.free_flow_time, np.nan)

    def totals(self) -> dict:
        vkt = float(self.vkt.sum())
        tt = float(self.travel_time.sum())
        return {
            "vkt": vkt,
            "empty_vkt": float(self.empty_vkt.sum()),
            "delay_time": float(self.delay_time.sum()),
            "free_flow_time": float(self.free_flow_time.sum()),
            "travel_time": tt,
            "avg_speed": vkt / tt if tt > 0 else float("nan"),
        }

    def rows(self) -> list[dict]:
        speed = self.avg_speed
        ratio = self.delay_ratio
        return [
            {
                "zone_id": z,
                "vkt": float(self.vkt[i]),
                "empty_vkt": float(self.empty_vkt[i]),
                "delay_time": float(self.delay_time[i]),
                "free_flow_time": float(self.free_flow_time[i]),
                "travel_time": float(self.travel_time[i]),
                "avg_speed": float(speed[i]),
                "delay_ratio": float(ratio[i]),
                "traversals": int(self.traversals[i]),
            }
            for i, z in enumerate(self.zone_ids)
        ]

    @classmethod
    def from_rows(cls, rows: Sequence[Mapping]) -> "ZoneMetrics":
        col = lambda k: np.array([float(r[k]) for r in rows])
        return cls(tuple(r["zone_id"] for r in rows), col("vkt"), col("empty_vkt"), col("delay_time"),
                   col("free_flow_time"), col("travel_time"), col("traversals").astype(np.int64))


def zone_metrics(events, network: Network, window: tuple | None = None, strict: bool = True) -> ZoneMetrics:
    """Aggregate enter/exit pairs into per-zone VKT, delay and speed.

    ``events`` are ``(time, vehicle, link, kind, is_empty_run)`` records in
    log order. A traversal counts toward ``window`` (``[start, end)``) when
    its exit falls inside it. Enters without an exit are in progress at the
    end of the log; they are ignored unless ``strict`` and no window was
    given. An exit without an enter always raises.
    """
    nz = network.n_zones
    vkt = np.zeros(nz)
    empty = np.zeros(nz)
    delay = np.zeros(nz)
    ff = np.zeros(nz)
    tt = np.zeros(nz)
    count = np.zeros(nz, dtype=np.int64)
    length_km = network.length / 1000.0
    fft = network.free_flow_time
    link_zone = network.link_zone
    open_: dict = {}
    for time, vid, li, kind, is_empty in events:
        if kind == ENTER:
            open_[(vid, li)] = time
            continue
        if kind != EXIT:
            raise ValueError(f"unknown event kind {kind!r}")
        enter = open_.pop((vid, li), None)
        if enter is None:
            raise UnmatchedEventError(f"exit without enter: vehicle {vid!r} link {li!r} at {time}")
        if window is not None and not window[0] <= time < window[1]:
            continue
        z = link_zone[li]
        d = length_km[li]
        vkt[z] += d
        if is_empty:
            empty[z] += d
        spent = time - enter
        late = spent - fft[li]
        if late > _TIME_EPS:
            delay[z] += late / 3600.0
        ff[z] += fft[li] / 3600.0
        tt[z] += spent / 3600.0
        count[z] += 1
    if strict and window is None and open_:
        raise UnmatchedEventError(f"{len(open_)} traversals have no exit")
    return ZoneMetrics(tuple(z.id for z in network.zones), vkt, empty, delay, ff, tt, count)


def format_change(new: float, old: float, digits: int = 1) -> str:
    """Relative change as ``(+14.9%)``."""
    if old == 0:
        return "(n/a)"
    pct = 100.0 * (new - old) / old
    return f"({pct:+.{digits}f}%)"


@dataclass
class ScenarioDiff:
    zone_ids: tuple
    parking: np.ndarray
    vkt: np.ndarray
    delay_time: np.ndarray
    avg_speed: np.ndarray
    totals: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [
            {"zone_id": z, "d_parking": float(self.parking[i]), "d_vkt": float(self.vkt[i]),
             "d_delay_time": float(self.delay_time[i]), "d_avg_speed": float(self.avg_speed[i])}
            for i, z in enumerate(self.zone_ids)
        ]


def scenario_diff(sav: ZoneMetrics, sav_parking, baseline: ZoneMetrics, baseline_parking) -> ScenarioDiff:
    """Per-zone SAV minus baseline differences and network totals with percentage changes."""
    if tuple(sav.zone_ids) != tuple(baseline.zone_ids):
        raise ValueError("scenarios use different zone systems")
    if len(sav_parking) != len(sav.zone_ids) or len(baseline_parking) != len(baseline.zone_ids):
        raise ValueError("parking vectors do not match the zone system")
    sp = np.asarray(sav_parking, dtype=float)
    bp = np.asarray(baseline_parking, dtype=float)
    st, bt = sav.totals(), baseline.totals()
    totals = {}
    for key in ("vkt", "delay_time", "avg_speed"):
        totals[key] = {"sav": st[key], "baseline": bt[key], "diff": st[key] - bt[key],
                       "change": format_change(st[key], bt[key])}
    totals["parking"] = {"sav": float(sp.sum()), "baseline": float(bp.sum()), "diff": float(sp.sum() - bp.sum()),
                         "change": format_change(sp.sum(), bp.sum())}
    return ScenarioDiff(tuple(sav.zone_ids), sp - bp, sav.vkt - baseline.vkt,
                        sav.delay_time - baseline.delay_time, sav.avg_speed - baseline.avg_speed, totals)


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman's rho: Pearson correlation of average ranks.

    Returns NaN when either ranking has zero variance.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d and of equal length")
    if len(x) < 3:
        raise ValueError("need at least three observations")
    rx = rankdata(x) - (len(x) + 1) / 2.0
    ry = rankdata(y) - (len(y) + 1) / 2.0
    sxx = float(rx @ rx)
    syy = float(ry @ ry)
    if sxx == 0 or syy == 0:
        return float("nan")
    rho = float(rx @ ry) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, rho))


def correlation_matrix(columns: Mapping[str, Sequence[float]]) -> tuple[list, np.ndarray]:
    names = list(columns)
    m = np.eye(len(names))
    for i, a in enumerate(names):
        for j in range(i + 1, len(names)):
            m[i, j] = m[j, i] = spearman(columns[a], columns[names[j]])
    return names, m


def desire_lines_geojson(flows: Mapping[str, Mapping[tuple, float]], network: Network) -> dict:
    """FeatureCollection of station-to-station lines with a ``volume`` property.

    ``flows`` maps a kind (``pickup`` / ``relocation``) to
    ``{(origin zone index, dest zone index): volume}``. Coordinates are the
    network's planar coordinates.
    """
    features = []
    for kind in sorted(flows):
        for (o, d), vol in sorted(flows[kind].items()):
            a = network.nodes[network.station_nodes[o]]
            b = network.nodes[network.station_nodes[d]]
            features.append({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [[a.x, a.y], [b.x, b.y]]},
                "properties": {"kind": kind, "origin_zone": network.zones[o].id,
                               "dest_zone": network.zones[d].id, "volume": vol},
            })
    return {"type": "FeatureCollection", "features": features}
