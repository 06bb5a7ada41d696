"""Readers and writers for the on-disk formats."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .demand import ODMatrix, expand_daily_to_hourly
from .flow import ENTER, EXIT
from .network import LAND_USE_TYPES, Link, Network, NetworkError, Node, Zone, build_network

LINK_COLUMNS = ("id", "from", "to", "length_m", "lanes", "ffs_kmh", "cap_vphpl", "jam_vpkmpl", "green_ratio",
                "toll", "zone_id")
EVENT_COLUMNS = ("time_s", "vehicle_id", "link_id", "event", "is_empty_run")
_EVENT_NAMES = {ENTER: "enter", EXIT: "exit"}
_EVENT_KINDS = {"enter": ENTER, "exit": EXIT}
_RECORD = struct.Struct("<dqBB")
_LENGTH = struct.Struct("<I")


def parse_id(text):
    """Identifiers are integers when they look like integers, strings otherwise."""
    if isinstance(text, (int, np.integer)):
        return int(text)
    s = str(text).strip()
    try:
        return int(s)
    except ValueError:
        return s


def _read_rows(path) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def _require(row, cols, path):
    missing = [c for c in cols if c not in row]
    if missing:
        raise NetworkError(f"{path}: missing columns {missing}")


def read_nodes_csv(path) -> list[Node]:
    rows = _read_rows(path)
    out = []
    for r in rows:
        _require(r, ("id", "x", "y"), path)
        out.append(Node(parse_id(r["id"]), float(r["x"]), float(r["y"])))
    return out


def read_links_csv(path) -> list[Link]:
    rows = _read_rows(path)
    out = []
    for r in rows:
        _require(r, ("id", "from", "to", "length_m", "lanes", "ffs_kmh", "cap_vphpl", "jam_vpkmpl", "zone_id"), path)
        out.append(Link(
            id=parse_id(r["id"]),
            from_node=parse_id(r["from"]),
            to_node=parse_id(r["to"]),
            length=float(r["length_m"]),
            lanes=int(r["lanes"]),
            free_flow_speed=float(r["ffs_kmh"]),
            capacity=float(r["cap_vphpl"]),
            jam_density=float(r["jam_vpkmpl"]),
            green_ratio=float(r.get("green_ratio") or 1.0),
            toll=float(r.get("toll") or 0.0),
            zone_id=parse_id(r["zone_id"]),
        ))
    return out


def read_zones_json(path) -> list[Zone]:
    with open(path) as f:
        records = json.load(f)
    out = []
    for rec in records:
        areas = {k: float(v) for k, v in rec.get("land_use_m2", {}).items()}
        out.append(Zone(
            id=parse_id(rec["id"]),
            station_node=parse_id(rec["station_node"]),
            land_use_areas=areas,
            households=float(rec.get("households", 0)),
            neighbors=tuple(parse_id(n) for n in rec.get("neighbors", ())),
        ))
    return out


def load_network_dir(directory) -> Network:
    d = Path(directory)
    return build_network(read_nodes_csv(d / "nodes.csv"), read_links_csv(d / "links.csv"),
                         read_zones_json(d / "zones.json"))


def write_network_dir(network: Network, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "nodes.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("id", "x", "y"))
        for n in network.nodes:
            w.writerow((n.id, repr(float(n.x)), repr(float(n.y))))
    with open(d / "links.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(LINK_COLUMNS)
        for l in network.links:
            w.writerow((l.id, l.from_node, l.to_node, repr(float(l.length)), l.lanes, repr(float(l.free_flow_speed)),
                        repr(float(l.capacity)), repr(float(l.jam_density)), repr(float(l.green_ratio)),
                        repr(float(l.toll)), l.zone_id))
    zones = [{
        "id": z.id,
        "land_use_m2": {k: z.land_use_areas.get(k, 0.0) for k in LAND_USE_TYPES},
        "households": z.households,
        "station_node": z.station_node,
        "neighbors": list(z.neighbors),
    } for z in network.zones]
    with open(d / "zones.json", "w") as f:
        json.dump(zones, f, indent=1)
        f.write("\n")


def read_od_csv(path, zone_ids: Sequence, hours: int = 24) -> ODMatrix:
    """``hour,origin_zone,dest_zone,trips`` rows; repeated cells add up."""
    index = {z: i for i, z in enumerate(zone_ids)}
    trips = np.zeros((hours, len(zone_ids), len(zone_ids)))
    for r in _read_rows(path):
        h = int(r["hour"])
        if not 0 <= h < hours:
            raise ValueError(f"{path}: hour {h} out of range")
        o, d = parse_id(r["origin_zone"]), parse_id(r["dest_zone"])
        if o not in index or d not in index:
            raise ValueError(f"{path}: unknown zone in pair ({o!r}, {d!r})")
        trips[h, index[o], index[d]] += float(r["trips"])
    return ODMatrix(trips, tuple(zone_ids))


def read_daily_od_csv(path, zone_ids: Sequence, coefficients: Sequence[float]) -> ODMatrix:
    """``origin_zone,dest_zone,trips`` daily totals expanded by hourly coefficients."""
    index = {z: i for i, z in enumerate(zone_ids)}
    daily = np.zeros((len(zone_ids), len(zone_ids)))
    for r in _read_rows(path):
        o, d = parse_id(r["origin_zone"]), parse_id(r["dest_zone"])
        if o not in index or d not in index:
            raise ValueError(f"{path}: unknown zone in pair ({o!r}, {d!r})")
        daily[index[o], index[d]] += float(r["trips"])
    return expand_daily_to_hourly(daily, coefficients, tuple(zone_ids))


def write_od_csv(od: ODMatrix, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("hour", "origin_zone", "dest_zone", "trips"))
        for h, o, d in zip(*np.nonzero(od.trips)):
            w.writerow((int(h), od.zone_ids[o], od.zone_ids[d], repr(float(od.trips[h, o, d]))))


def read_time_coefficients(path) -> np.ndarray:
    coef = np.zeros(24)
    seen = set()
    for r in _read_rows(path):
        h = int(r["hour"])
        if not 0 <= h < 24 or h in seen:
            raise ValueError(f"{path}: bad or repeated hour {h}")
        seen.add(h)
        coef[h] = float(r["coefficient"])
    if len(seen) != 24:
        raise ValueError(f"{path}: expected 24 rows, got {len(seen)}")
    return coef


def read_rates_json(path) -> dict:
    with open(path) as f:
        rates = json.load(f)
    return {k: float(v) for k, v in rates.items()}


def read_arrivals_csv(path) -> dict:
    return {parse_id(r["zone_id"]): float(r["arrivals"]) for r in _read_rows(path)}


def file_digest(paths: Iterable) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).name.encode())
        h.update(b"\0")
        h.update(Path(p).read_bytes())
        h.update(b"\0")
    return h.hexdigest()


# -- event log --------------------------------------------------------------

def _fmt_time(t: float) -> str:
    return str(int(t)) if float(t).is_integer() else repr(float(t))


def write_events_csv(events, network: Network, f) -> None:
    f.write(",".join(EVENT_COLUMNS) + "\n")
    ids = [l.id for l in network.links]
    for t, vid, li, kind, empty in events:
        f.write(f"{_fmt_time(t)},{vid},{ids[li]},{_EVENT_NAMES[kind]},{int(bool(empty))}\n")


def read_events_csv(f, network: Network) -> list:
    out = []
    for r in csv.DictReader(f):
        out.append((float(r["time_s"]), parse_id(r["vehicle_id"]), network.link_index[parse_id(r["link_id"])],
                    _EVENT_KINDS[r["event"]], r["is_empty_run"] == "1"))
    return out


def write_events_binary(events, network: Network, f) -> None:
    """Length-prefixed records: u32 length, then f64 time, i64 vehicle,
    u8 event (0 enter, 1 exit), u8 empty flag and the UTF-8 link id."""
    ids = [str(l.id).encode() for l in network.links]
    for t, vid, li, kind, empty in events:
        payload = _RECORD.pack(float(t), int(vid), kind, int(bool(empty))) + ids[li]
        f.write(_LENGTH.pack(len(payload)))
        f.write(payload)


def read_events_binary(f, network: Network) -> list:
    out = []
    while True:
        head = f.read(_LENGTH.size)
        if not head:
            break
        (n,) = _LENGTH.unpack(head)
        payload = f.read(n)
        t, vid, kind, empty = _RECORD.unpack_from(payload)
        link = parse_id(payload[_RECORD.size:].decode())
        out.append((t, vid, network.link_index[link], kind, bool(empty)))
    return out


def events_to_csv_text(events, network: Network) -> str:
    buf = io.StringIO()
    write_events_csv(events, network, buf)
    return buf.getvalue()


def rows_to_csv_text(rows: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    buf = io.StringIO()
    if not rows and columns is None:
        return ""
    columns = list(columns or rows[0].keys())
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt_cell(r.get(k)) for k in columns})
    return buf.getvalue()


def _fmt_cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if v != v:
            return "nan"
        return repr(round(v, 9)) if not v.is_integer() else str(int(v)) if abs(v) < 1e15 else repr(v)
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v
