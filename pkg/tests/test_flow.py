import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from savsim.analysis import zone_metrics
from savsim.flow import FlowClock, FlowModel, logit_probabilities, node_transfer, refresh_travel_times
from savsim.network import Link, Node, Zone, build_network
from savsim.routing import Route, TravelTimeTable, shortest_path
from savsim.flow import choose_route
from savsim.synthetic import bottleneck_network, grid_network, merge_network

from helpers import check_log_fifo, check_step_invariants, exits_by_link, load_bottleneck, queue_triangle


def single_link(length=600.0, speed=60.0):
    net = build_network([Node("a", 0, 0), Node("b", length, 0)],
                        [Link("ab", "a", "b", length, 1, speed, 1800.0, 150.0, zone_id="z")], [Zone("z", "a")])
    return net


def test_free_flow_traversal_time():
    net = single_link()
    flow = FlowModel(net)
    flow.depart(7, [0])
    arrivals = []
    while not arrivals:
        arrivals = flow.advance()
    assert arrivals == [(7, 1, 36.0)]
    assert flow.finish() == [(0.0, 7, 0, 0, False), (36.0, 7, 0, 1, False)]


def test_bottleneck_against_queue_triangle():
    net = bottleneck_network()
    flow, arrivals, n = load_bottleneck(net)
    events = flow.finish()
    delay = zone_metrics(events, net).delay_time.sum()
    want_delay, clear = queue_triangle(1800.0, 900.0, 3600.0)
    assert delay == pytest.approx(want_delay, rel=0.01)
    # first vehicle reaches the neck after 300 s; the queue then drains at one vehicle per 4 s
    last = max(t for _, _, t in arrivals)
    assert abs(last - (300 + 60 + (n - 1) * 4.0)) <= 1.0
    assert abs((last - 360) - clear) <= 4.0 + 1.0
    assert len(arrivals) == n
    check_log_fifo(events)


def test_merge_shares_capacity_equally_when_both_queue():
    net = merge_network()
    flow = FlowModel(net)
    a, b, d = (net.link_index[k] for k in ("a-m", "b-m", "m-d"))
    for i in range(1800):
        flow.depart(2 * i, [a, d], i * 2.0)
        flow.depart(2 * i + 1, [b, d], i * 2.0)
    for _ in range(3600):
        flow.advance()
        check_step_invariants(flow)
    events = flow.finish()
    na = exits_by_link(events, a, 1200, 3600)
    nb = exits_by_link(events, b, 1200, 3600)
    # fluid merge: each approach gets half of the 0.5 veh/s downstream capacity
    assert na == pytest.approx(600, abs=2)
    assert nb == pytest.approx(600, abs=2)
    assert exits_by_link(events, d, 1260, 3600) <= 0.5 * (3600 - 1260) + 1
    check_log_fifo(events)


def test_merge_below_capacity_passes_everything():
    net = merge_network()
    flow = FlowModel(net)
    a, b, d = (net.link_index[k] for k in ("a-m", "b-m", "m-d"))
    for i in range(200):
        flow.depart(("a", i), [a, d], i * 6.0)
        flow.depart(("b", i), [b, d], i * 6.0 + 3.0)
    arrivals = []
    for _ in range(1600):
        arrivals.extend(flow.advance())
    assert len(arrivals) == 400
    delay = zone_metrics(flow.finish(), net).delay_time.sum()
    assert delay == 0


def test_spillback_blocks_upstream_entry():
    # 200 m downstream link discharges 360 veh/h; the queue spills into the 300 m approach
    nodes = [Node(0, 0, 0), Node(1, 300, 0), Node(2, 500, 0)]
    links = [Link("u", 0, 1, 300.0, 1, 54.0, 1800.0, 150.0, zone_id="z"),
             Link("d", 1, 2, 200.0, 1, 54.0, 1800.0, 150.0, green_ratio=0.2, zone_id="z")]
    net = build_network(nodes, links, [Zone("z", 0)])
    u, d = net.link_index["u"], net.link_index["d"]
    flow = FlowModel(net)
    for i in range(400):
        flow.depart(i, [u, d], i * 2.0)
    peak_wait = 0
    for _ in range(900):
        flow.advance()
        check_step_invariants(flow)
        peak_wait = max(peak_wait, flow.waiting())
    # congested branch of the triangle: density k_jam - q/|w| = 150 - 360/15 veh/km
    k = 150 - 360 / 15
    assert flow.states[d].on_link == pytest.approx(k * 0.2, abs=1.5)
    assert flow.states[u].on_link == pytest.approx(k * 0.3, abs=1.5)
    assert peak_wait > 100
    check_log_fifo(flow.finish())


def random_trips(net, rng, n, horizon):
    table = TravelTimeTable.free_flow(net)
    trips = []
    while len(trips) < n:
        o, d = rng.integers(0, net.n_nodes, 2)
        if o == d:
            continue
        r = shortest_path(net, int(o), int(d), table)
        trips.append((float(rng.uniform(0, horizon)), r.links))
    return trips


def test_conservation_fifo_storage_on_congested_grid():
    net = grid_network(capacity=600.0, jam_density=60.0)
    rng = np.random.default_rng(42)
    flow = FlowModel(net)
    for vid, (t, links) in enumerate(random_trips(net, rng, 1800, 900.0)):
        flow.depart(vid, links, t)
    steps = 0
    while flow.vehicles and steps < 12_000:
        flow.advance()
        check_step_invariants(flow)
        steps += 1
    assert steps >= 1000
    assert flow.retired == 1800
    check_log_fifo(flow.finish())


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), dt=st.sampled_from([1.0, 2.0, 5.0]),
       cap=st.floats(300.0, 2400.0), jam=st.floats(60.0, 200.0), n=st.integers(1, 300))
def test_conservation_property(seed, dt, cap, jam, n):
    net = merge_network(length=400.0, capacity=cap, downstream_capacity=cap / 2, jam_density=max(jam, cap / 60 + 5))
    rng = np.random.default_rng(seed)
    a, b, d = (net.link_index[k] for k in ("a-m", "b-m", "m-d"))
    for i in range(n):
        flow_links = [a, d] if rng.random() < 0.5 else [b, d]
        if rng.random() < 0.2:
            flow_links = flow_links[:1]
        if i == 0:
            flow = FlowModel(net, dt)
        flow.depart(i, flow_links, float(rng.uniform(0, 600)))
    steps = 0
    while flow.vehicles:
        flow.advance()
        check_step_invariants(flow)
        steps += 1
        assert steps < 20_000
    assert flow.retired == n
    check_log_fifo(flow.finish())


def test_node_transfer_rationing():
    out = node_transfer({0: {5: 3}, 1: {5: 1}}, {5: 2})
    assert out == {(0, 5): 2, (1, 5): 0}
    out = node_transfer({0: {5: 2, -1: 4}, 3: {5: 2}}, {5: 1})
    assert out[(0, -1)] == 4
    assert out[(0, 5)] + out[(3, 5)] == 1
    assert node_transfer({0: {1: 2}}, {1: 5}) == {(0, 1): 2}


def test_logit_probabilities():
    p = logit_probabilities([10.0, 10.0, 20.0], 0.0)
    assert p == pytest.approx([1 / 3] * 3)
    p = logit_probabilities([10.0, 11.0], 1.0)
    assert p[0] / p[1] == pytest.approx(math.e)
    assert list(logit_probabilities([3.0, 1.0, 1.0], math.inf)) == [0.0, 1.0, 0.0]
    rng = np.random.default_rng(0)
    routes = [Route(0, 1, (0,), 10.0), Route(0, 1, (1,), 10.0 + math.log(3) / 0.1)]
    picks = [choose_route(routes, 0.1, rng) for _ in range(8000)]
    assert np.mean(np.array(picks) == 0) == pytest.approx(0.75, abs=0.02)


def test_refresh_travel_times():
    net = bottleneck_network()
    flow, _, _ = load_bottleneck(net, duration=600.0, horizon=400.0)
    table = TravelTimeTable.free_flow(net)
    new = refresh_travel_times(flow, table, 400.0)
    up, neck = net.link_index["up"], net.link_index["neck"]
    assert new.times[up] == pytest.approx(300.0)
    assert new.times[neck] >= net.free_flow_time[neck]
    assert new.version == table.version + 1
    # nothing exited since: carry forward, same version
    again = refresh_travel_times(flow, new, 400.0)
    assert again.version == new.version and np.array_equal(again.times, new.times)


def test_reroute_and_withdraw():
    net = grid_network()
    table = TravelTimeTable.free_flow(net)
    flow = FlowModel(net)
    r1 = shortest_path(net, 0, 4, table).links
    r2 = shortest_path(net, 0, 20, table).links
    flow.depart(1, r1, 10.0)
    assert flow.position(1) == ("node", 0)
    flow.reroute(1, r2)
    flow.depart(2, r1)
    flow.withdraw(2)
    arrivals = []
    for _ in range(400):
        arrivals.extend(flow.advance())
    assert [(v, n) for v, n, _ in arrivals] == [(1, 20)]


def test_clock_cadence():
    c = FlowClock(60.0, 1.0)
    assert c.due(30) and c.due(60) and not c.due(600)
    with pytest.raises(ValueError):
        FlowClock(0.0, 4.0).steps(30)
