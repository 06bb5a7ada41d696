import dataclasses
import math

import numpy as np
import pytest

from savsim.demand import ODMatrix, RequestState
from savsim.flow import ENTER, EXIT
from savsim.analysis import zone_metrics
from savsim.scenario import (ConfigError, InputMismatchError, ScenarioConfig, ScenarioInputs, compare,
                             load_run, parse_clock, run_baseline, run_sav, write_run)
from savsim.synthetic import grid_network

from conftest import grid_config


def sparse_inputs(cells):
    """Grid inputs whose OD holds only ``{(hour, o, d): rate}``."""
    net = grid_network()
    trips = np.zeros((24, 25, 25))
    for (h, o, d), rate in cells.items():
        trips[h, o, d] = rate
    return ScenarioInputs(net, ODMatrix(trips, tuple(range(25))))


SHORT = dict(warm_up=0.0, report_start=7 * 3600.0, report_end=10 * 3600.0)


def test_config_text_roundtrip_and_clock():
    cfg = ScenarioConfig.from_text("""
        # morning peak
        scenario = sav
        fleet_size = 120
        report_start = 07:00
        report_end = 9:00
        warm_up = 03:00
        seed = 9
    """)
    assert cfg.start == 4 * 3600 and cfg.report_end == 9 * 3600 and cfg.fleet_size == 120
    assert ScenarioConfig.from_text(cfg.to_text()) == cfg
    assert parse_clock("07:30:15") == 7 * 3600 + 30 * 60 + 15


@pytest.mark.parametrize("text, msg", [
    ("colour = red", "unknown key"),
    ("scenario = sav\nfleet_size = 0", "fleet_size"),
    ("scenario = baseline\nrelocation_period = 301\ndt = 2", "multiple of dt"),
    ("scenario = baseline\nthreshold_low = 5\nthreshold_high = -5", "threshold"),
    ("scenario = baseline\nreport_start = 9:00\nreport_end = 8:00", "window"),
    ("scenario = tram", "unknown scenario"),
    ("scenario baseline", "expected key"),
])
def test_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        ScenarioConfig.from_text(text)


def test_zero_demand_baseline():
    inputs = sparse_inputs({})
    res = run_baseline(grid_config(scenario="baseline", **SHORT), inputs)
    assert res.summary["total_vkt"] == 0
    assert res.parking_estimate.arrivals.sum() == 0
    assert res.parking_estimate.garage_slots.sum() == pytest.approx(grid_config().registered_vehicles)


def test_single_trip_baseline_is_free_flow():
    inputs = sparse_inputs({(7, 0, 24): 1.0})
    res = run_baseline(grid_config(**SHORT), inputs)
    (req,) = res.requests
    assert req.generation_time == 8 * 3600 - 30
    assert res.metrics.vkt.sum() == pytest.approx(4.0)  # eight 500 m blocks
    assert res.metrics.delay_time.sum() == 0
    assert req.arrival_time - req.generation_time == pytest.approx(400.0)


def test_single_vehicle_wait_is_pickup_travel_time():
    # one vehicle starts in zone 0, serves 0 -> 24, then is called to zone 12
    inputs = sparse_inputs({(7, 0, 24): 1.0, (8, 12, 0): 1.0})
    res = run_sav(grid_config(fleet_size=1, **SHORT), inputs, check=True)
    first, second = res.requests
    assert first.wait == 0.0
    assert second.wait == pytest.approx(4 * 50.0)
    etas = [e[-1] for e in res.dispatch_log if e[1] == "assigned"]
    assert etas == pytest.approx([0.0, 200.0])
    assert res.summary["fleet_empty_km"] == pytest.approx(2.0)
    assert res.summary["total_empty_vkt"] == pytest.approx(2.0)


def test_baseline_vkt_matches_route_lengths(grid, grid_runs):
    base = grid_runs[0]
    net = grid.network
    full = zone_metrics(base.events, net, strict=False)
    by_vehicle = {}
    for t, vid, li, kind, _ in base.events:
        if kind == ENTER:
            by_vehicle.setdefault(vid, []).append(li)
    completed = [r for r in base.requests if r.state is RequestState.COMPLETED and r.origin != r.dest]
    for r in completed:
        links = by_vehicle[r.id]
        assert net.link_from[links[0]] == net.station_nodes[r.origin]
        assert net.link_to[links[-1]] == net.station_nodes[r.dest]
        for a, b in zip(links, links[1:]):
            assert net.link_to[a] == net.link_from[b]
    exited = sum(net.length[li] for _, _, li, kind, _ in base.events if kind == EXIT) / 1000
    assert full.vkt.sum() == pytest.approx(exited, abs=1e-9)
    assert base.summary["total_empty_vkt"] == 0


def test_sav_accounting(grid, grid_runs):
    _, sav, _ = grid_runs
    s = sav.summary
    assert s["total_vkt"] >= s["total_occupied_vkt"] >= 0
    assert s["total_empty_vkt"] == s["total_vkt"] - s["total_occupied_vkt"]
    net = grid.network
    lo, hi = sav.config.report_start, sav.config.report_end
    empty = sum(net.length[li] for t, _, li, k, e in sav.events if k == EXIT and e and lo <= t < hi) / 1000
    assert s["total_empty_vkt"] == pytest.approx(empty)
    for r in sav.requests:
        times = [x for x in (r.generation_time, r.assignment_time, r.pickup_time, r.arrival_time) if x is not None]
        assert times == sorted(times)


@pytest.mark.parametrize("which", [0, 1])
def test_window_requests_accounted(grid_runs, which):
    s = grid_runs[which].summary
    assert s["completed_in_window"] + s["in_progress_in_window"] + s["waitlisted_in_window"] == \
        s["requests_in_window"]
    assert s["requests_in_window"] > 4500


def test_compare_against_itself(grid_runs):
    _, sav, _ = grid_runs
    bundle = compare(dataclasses.replace(sav, scenario="baseline"), sav)
    diff = bundle.files["diff.csv"]
    rows = diff.split("\n\n")[0].splitlines()[1:]
    assert all(set(r.split(",")[1:]) == {"0"} for r in rows)
    assert "undefined" in diff
    assert "(+0.0%)" in bundle.files["traffic_totals.csv"]


def test_compare_rejects_different_inputs(grid_runs):
    base, sav, _ = grid_runs
    with pytest.raises(InputMismatchError):
        compare(base, dataclasses.replace(sav, fingerprint="0" * 64))


def test_parking_reduction_in_garage_zones(grid, grid_runs):
    base, sav, _ = grid_runs
    assert sav.config.fleet_size < base.config.registered_vehicles
    for i, z in enumerate(grid.network.zones):
        if z.households > 0:
            assert base.parking_slots[i] > sav.parking_slots[i]


def test_land_use_table_groups_by_dominant_use(grid_runs):
    base, sav, _ = grid_runs
    table = compare(base, sav).files["parking_by_land_use.csv"].splitlines()
    kinds = [line.split(",")[0] for line in table[1:]]
    assert kinds == ["office", "commerce", "residence", "industry", "park", "transport", "nature", "total"]
    total = table[-1].split(",")
    assert int(total[2]) == base.parking_slots.sum() and int(total[4]) == sav.parking_slots.sum()


def test_run_directory_roundtrip(tmp_path, grid, grid_runs):
    base, sav, _ = grid_runs
    write_run(base, tmp_path / "b", grid.network)
    write_run(sav, tmp_path / "s", grid.network, events_format="binary")
    lb, ls = load_run(tmp_path / "b"), load_run(tmp_path / "s")
    assert lb.fingerprint == base.fingerprint and ls.config == sav.config
    assert np.array_equal(ls.parking_slots, sav.parking_slots)
    direct = compare(base, sav).files["parking_by_land_use.csv"]
    assert compare(lb, ls).files["parking_by_land_use.csv"] == direct
    assert (tmp_path / "s" / "events.bin").stat().st_size > 0
    assert (tmp_path / "s" / "dispatch_log.csv").read_text().startswith("time_s,event")


def test_sav_needs_fleet(grid):
    with pytest.raises(ConfigError):
        run_sav(grid_config(fleet_size=0), grid)


def test_unserved_requests_reported():
    inputs = sparse_inputs({(7, 0, 24): 240.0})
    res = run_sav(grid_config(fleet_size=2, max_wait=60.0, **SHORT), inputs)
    s = res.summary
    assert s["waitlist_max"] > 0 and s["unserved_at_end"] > 0
    assert not math.isnan(s["wait_mean_s"])
