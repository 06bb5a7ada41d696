"""Command line entry point: ``savsim run | compare | sweep | parking estimate``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from . import parking as pk
from .scenario import ScenarioConfig, ScenarioInputs, compare, load_run, run, sweep, write_run

logger = logging.getLogger("savsim")


class UsageError(ValueError):
    pass


def _fleet_range(text: str) -> list[int]:
    """``start:stop:step`` (inclusive stop) or a comma list."""
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[0] <= 0 or parts[1] < parts[0]:
            raise UsageError(f"bad fleet range {text!r}; expected start:stop:step")
        return list(range(parts[0], parts[1] + 1, parts[2]))
    sizes = [int(p) for p in text.split(",") if p.strip()]
    if not sizes or min(sizes) <= 0:
        raise UsageError(f"bad fleet list {text!r}")
    return sizes


def _load_inputs(args) -> ScenarioInputs:
    net_dir = Path(args.network_dir)
    network = io.load_network_dir(net_dir)
    zone_ids = [z.id for z in network.zones]
    files = [net_dir / "nodes.csv", net_dir / "links.csv", net_dir / "zones.json", Path(args.od)]
    if args.time_coefficients:
        coef = io.read_time_coefficients(args.time_coefficients)
        od = io.read_daily_od_csv(args.od, zone_ids, coef)
        files.append(Path(args.time_coefficients))
    else:
        od = io.read_od_csv(args.od, zone_ids)
    rates = None
    if args.rates:
        rates = io.read_rates_json(args.rates)
        files.append(Path(args.rates))
    for w in network.warnings:
        logger.warning(w)
    return ScenarioInputs(network, od, rates, io.file_digest(files))


def _load_config(args) -> ScenarioConfig:
    cfg = ScenarioConfig.from_file(args.config)
    overrides = {}
    for key in ("scenario", "fleet_size", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    return dataclasses.replace(cfg, **overrides).validate() if overrides else cfg


def cmd_run(args) -> dict:
    cfg = _load_config(args)
    inputs = _load_inputs(args)
    result = run(cfg, inputs, record_events=args.events != "none")
    write_run(result, args.out, inputs.network, "binary" if args.events == "binary" else "csv")
    return {"out": str(args.out), "scenario": result.scenario, "summary": json.loads(
        (Path(args.out) / "summary.json").read_text())}


def cmd_compare(args) -> dict:
    bundle = compare(load_run(args.baseline), load_run(args.sav))
    bundle.write(args.out)
    return {"out": str(args.out), "files": sorted(bundle.files)}


def cmd_sweep(args) -> dict:
    cfg = _load_config(args)
    sizes = _fleet_range(args.fleet)
    inputs = _load_inputs(args)
    rows = sweep(dataclasses.replace(cfg, scenario="sav", fleet_size=sizes[0]), inputs, sizes, args.jobs)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(io.rows_to_csv_text(rows))
    return {"sweep": rows}


def cmd_parking_estimate(args) -> dict:
    zones = io.read_zones_json(args.zones)
    rates = io.read_rates_json(args.rates) if args.rates else None
    arrivals_by_zone = io.read_arrivals_csv(args.arrivals)
    unknown = set(arrivals_by_zone) - {z.id for z in zones}
    if unknown:
        raise UsageError(f"arrivals for unknown zones: {sorted(map(str, unknown))}")
    arrivals = np.array([arrivals_by_zone.get(z.id, 0.0) for z in zones])
    est = pk.estimate_baseline(zones, arrivals, rates, args.registered)
    rows = [{"zone_id": z.id, "facility_slots": est.facility_slots[i], "garage_slots": est.garage_slots[i],
             "arrivals": arrivals[i], "final_slots": int(est.final_slots[i]),
             "area_m2": float(est.area_m2[i])} for i, z in enumerate(zones)]
    if args.out:
        Path(args.out).write_text(io.rows_to_csv_text(rows))
    return {"turnover": est.turnover, "r_squared": est.r_squared, "total_slots": int(est.final_slots.sum()),
            "zones": rows if not args.out else str(args.out)}


def _add_inputs(p, need_out=True):
    p.add_argument("--config", required=True, help="flat key = value scenario file")
    p.add_argument("--network-dir", required=True, help="directory with nodes.csv, links.csv, zones.json")
    p.add_argument("--od", required=True, help="hourly od.csv, or daily totals with --time-coefficients")
    p.add_argument("--time-coefficients", help="24-row hour,coefficient file; marks --od as daily")
    p.add_argument("--rates", help="JSON land-use type -> parking generation rate")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=need_out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="savsim", description="SAV fleet and parking demand simulation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario")
    _add_inputs(p)
    p.add_argument("--scenario", choices=("baseline", "sav"))
    p.add_argument("--fleet-size", dest="fleet_size", type=int)
    p.add_argument("--events", choices=("csv", "binary", "none"), default="csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="build the comparison report from two run directories")
    p.add_argument("--baseline", required=True)
    p.add_argument("--sav", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="mean wait time over a grid of fleet sizes")
    _add_inputs(p, need_out=False)
    p.add_argument("--fleet", required=True, help="start:stop:step or a comma list")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("parking", help="parking demand tools")
    psub = p.add_subparsers(dest="parking_command", required=True)
    e = psub.add_parser("estimate", help="baseline parking demand from land use and arrivals")
    e.add_argument("--zones", required=True, help="zones.json")
    e.add_argument("--rates", help="JSON of generation rates (defaults to the built-in table)")
    e.add_argument("--arrivals", required=True, help="CSV zone_id,arrivals")
    e.add_argument("--registered", type=float, default=0.0, help="registered private vehicles")
    e.add_argument("--out", help="write per-zone CSV here instead of printing it")
    e.set_defaults(func=cmd_parking_estimate)
    return parser


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return None if x != x else x
    raise TypeError(type(x).__name__)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        out = args.func(args)
    except (ValueError, OSError, KeyError, RuntimeError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        sys.stderr.write(json.dumps(err) + "\n")
        return 2
    sys.stdout.write(json.dumps(out, default=_jsonable, indent=1) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
