import math

import numpy as np
import pytest

from savsim.analysis import (UnmatchedEventError, ZoneMetrics, correlation_matrix, desire_lines_geojson,
                             format_change, scenario_diff, spearman, zone_metrics)
from savsim.flow import ENTER, EXIT, FlowModel
from savsim.network import Link, Node, Zone, build_network
from savsim.synthetic import grid_network


def km_link():
    return build_network([Node(0, 0, 0), Node(1, 1000, 0)], [Link("l", 0, 1, 1000.0, 1, 60.0, zone_id="z")],
                         [Zone("z", 0)])


def test_single_traversal_arithmetic():
    net = km_link()
    m = zone_metrics([(0.0, 1, 0, ENTER, False), (120.0, 1, 0, EXIT, False)], net)
    assert m.vkt.tolist() == [1.0]
    assert m.delay_time[0] * 3600 == pytest.approx(60.0)
    assert m.avg_speed[0] == pytest.approx(30.0)
    assert m.delay_ratio[0] == pytest.approx(1.0)
    assert m.empty_vkt[0] == 0


def test_unmatched_and_windowing():
    net = km_link()
    with pytest.raises(UnmatchedEventError):
        zone_metrics([(5.0, 1, 0, EXIT, False)], net)
    with pytest.raises(UnmatchedEventError):
        zone_metrics([(5.0, 1, 0, ENTER, False)], net)
    assert zone_metrics([(5.0, 1, 0, ENTER, False)], net, window=(0, 10)).vkt.sum() == 0
    events = [(0.0, 1, 0, ENTER, True), (70.0, 1, 0, EXIT, True), (50.0, 2, 0, ENTER, False),
              (130.0, 2, 0, EXIT, False)]
    m = zone_metrics(events, net, window=(60.0, 120.0))
    assert m.vkt.tolist() == [1.0] and m.empty_vkt.tolist() == [1.0]


def test_vkt_sums_to_log_distance():
    net = grid_network()
    flow = FlowModel(net)
    rng = np.random.default_rng(0)
    for v in range(300):
        a = int(rng.integers(0, net.n_links))
        route = [a]
        for _ in range(4):
            nxt = net.out_links[net.link_to[route[-1]]]
            route.append(nxt[int(rng.integers(0, len(nxt)))])
        flow.depart(v, route, float(rng.uniform(0, 300)), empty=bool(v % 2))
    while flow.vehicles:
        flow.advance()
    events = flow.finish()
    m = zone_metrics(events, net)
    dist = sum(net.length[li] for _, _, li, kind, _ in events if kind == EXIT) / 1000
    assert m.vkt.sum() == dist
    assert (m.avg_speed[m.travel_time > 0] <= 36.0 + 1e-9).all()
    assert (m.delay_time >= 0).all()


def test_delay_ratio_invariant_to_subdivision():
    whole = build_network([Node(0, 0, 0), Node(1, 1000, 0)], [Link("l", 0, 1, 1000.0, 1, 60.0, zone_id="z")],
                          [Zone("z", 0)])
    split = build_network([Node(0, 0, 0), Node(1, 400, 0), Node(2, 1000, 0)],
                          [Link("a", 0, 1, 400.0, 1, 60.0, zone_id="z"), Link("b", 1, 2, 600.0, 1, 60.0, zone_id="z")],
                          [Zone("z", 0)])
    ratios = []
    for net in (whole, split):
        flow = FlowModel(net)
        for v in range(20):
            flow.depart(v, list(range(net.n_links)), v * 10.0)
        while flow.vehicles:
            flow.advance()
        ratios.append(zone_metrics(flow.finish(), net).delay_ratio[0])
    assert ratios == [0.0, 0.0]


def test_format_change():
    assert format_change(482_215, 419_665) == "(+14.9%)"
    assert format_change(90, 100) == "(-10.0%)"
    assert format_change(1, 0) == "(n/a)"


def metrics(rng, ids=(1, 2, 3, 4)):
    n = len(ids)
    tt = rng.uniform(1, 5, n)
    return ZoneMetrics(ids, rng.uniform(0, 50, n), rng.uniform(0, 5, n), rng.uniform(0, 1, n), tt * 0.8, tt,
                       rng.integers(1, 9, n))


def test_scenario_diff_antisymmetry_and_identity():
    rng = np.random.default_rng(1)
    a, b = metrics(rng), metrics(rng)
    pa, pb = rng.integers(0, 100, 4), rng.integers(0, 100, 4)
    ab = scenario_diff(a, pa, b, pb)
    ba = scenario_diff(b, pb, a, pa)
    for f in ("parking", "vkt", "delay_time", "avg_speed"):
        assert np.array_equal(getattr(ab, f), -getattr(ba, f))
    same = scenario_diff(a, pa, a, pa)
    assert not same.vkt.any() and not same.parking.any()
    assert same.totals["vkt"]["change"] == "(+0.0%)"
    with pytest.raises(ValueError):
        scenario_diff(a, pa, metrics(rng, (1, 2, 3, 5)), pb)


def rank_oracle(v):
    """Average ranks by counting: rank = #smaller + (#equal + 1) / 2."""
    return [sum(w < x for w in v) + (sum(w == x for w in v) + 1) / 2 for x in v]


def pearson_oracle(x, y):
    mx, my = sum(x) / len(x), sum(y) / len(y)
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def test_spearman_monotone_and_ties():
    x = [1.0, 4.0, 2.5, 10.0, -3.0]
    assert spearman(x, [2 * v + 1 for v in x]) == 1.0
    assert spearman(x, [-v ** 3 for v in x]) == -1.0
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(3, 15))
        a = rng.integers(0, 4, n).astype(float)
        b = rng.integers(0, 4, n).astype(float)
        rho = spearman(a, b)
        ra, rb = rank_oracle(list(a)), rank_oracle(list(b))
        if len(set(ra)) == 1 or len(set(rb)) == 1:
            assert math.isnan(rho)
        else:
            assert abs(rho - pearson_oracle(ra, rb)) < 1e-12
    assert spearman(x, np.exp(x)) == 1.0
    with pytest.raises(ValueError):
        spearman([1, 2], [1, 2])


def test_spearman_monotone_transform_invariance():
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=20), rng.normal(size=20)
    assert spearman(x, y) == pytest.approx(spearman(np.exp(x), y ** 3), abs=1e-12)


def test_correlation_matrix_and_geojson():
    names, m = correlation_matrix({"a": [1, 2, 3], "b": [3, 2, 1], "c": [1, 1, 1]})
    assert names == ["a", "b", "c"]
    assert m[0, 1] == -1.0 and math.isnan(m[0, 2])
    net = grid_network()
    gj = desire_lines_geojson({"pickup": {(0, 24): 3}, "relocation": {(1, 2): 1}}, net)
    assert [f["properties"]["kind"] for f in gj["features"]] == ["pickup", "relocation"]
    assert gj["features"][0]["geometry"]["coordinates"] == [[0.0, 0.0], [2000.0, 2000.0]]
    assert gj["features"][0]["properties"]["volume"] == 3
