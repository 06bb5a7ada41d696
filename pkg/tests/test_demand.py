import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from savsim.demand import (BINS_PER_HOUR, CarryoverAccumulator, DemandError, ODMatrix, RequestStream,
                           emit_requests, expand_daily_to_hourly, expected_generation,
                           expected_generation_by_zone)


def one_pair(rate, hours=1):
    trips = np.zeros((hours, 2, 2))
    trips[:, 0, 1] = rate
    return ODMatrix(trips, ("a", "b"))


def emitted_per_bin(od, bins):
    acc = CarryoverAccumulator(len(od.zone_ids))
    return [len(emit_requests(od, 30.0, acc, 30.0 * k)) for k in range(bins)]


def test_rate_one_per_bin():
    assert emitted_per_bin(one_pair(120), 120) == [1] * 120


def test_rate_half_per_bin_alternates():
    counts = emitted_per_bin(one_pair(60), 8)
    assert counts == [0, 1, 0, 1, 0, 1, 0, 1]


def test_ninety_per_hour():
    counts = emitted_per_bin(one_pair(90), 120)
    assert sum(counts) == 90
    # cumulative-floor oracle
    assert np.cumsum(counts).tolist() == [math.floor(90 * (k + 1) / 120 + 1e-12) for k in range(120)]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 500, allow_nan=False), min_size=1, max_size=6), st.integers(1, 3))
def test_carryover_bounded(rates, hours):
    n = len(rates)
    trips = np.zeros((hours, n, n))
    for i, r in enumerate(rates):
        trips[:, i, (i + 1) % n] = r
    od = ODMatrix(trips, tuple(range(n)))
    acc = CarryoverAccumulator(n)
    emitted = np.zeros((n, n))
    for k in range(hours * BINS_PER_HOUR):
        for r in emit_requests(od, 30.0, acc, 30.0 * k):
            emitted[r.origin, r.dest] += 1
        assert (acc.residual < 1).all() and (acc.residual >= 0).all()
        exact = trips[: k // 120 + 1].sum(axis=0) - trips[k // 120] * (1 - (k % 120 + 1) / 120)
        assert (np.abs(exact - emitted) < 1 + 1e-6).all()


def test_stream_ids_dense_and_ordered():
    rng = np.random.default_rng(4)
    od = ODMatrix(rng.uniform(0, 200, (2, 4, 4)), ("w", "x", "y", "z"))
    stream = RequestStream(od)
    seen = []
    for k in range(240):
        batch = stream.emit(30.0 * k)
        keys = [(r.origin, r.dest) for r in batch]
        assert keys == sorted(keys)
        assert all(r.generation_time == 30.0 * k for r in batch)
        seen.extend(r.id for r in batch)
    assert seen == list(range(len(seen)))
    assert len(seen) == pytest.approx(od.trips.sum(), abs=16)


def test_expand_daily():
    daily = np.array([[0.0, 2400.0], [100.0, 0.0]])
    coef = np.zeros(24)
    coef[7] = 0.10
    coef[8] = 0.90
    od = expand_daily_to_hourly(daily, coef)
    assert od.trips[7, 0, 1] == pytest.approx(240.0)
    np.testing.assert_allclose(od.trips.sum(axis=0), daily)
    uniform = expand_daily_to_hourly(daily, np.full(24, 1 / 24))
    assert np.allclose(uniform.trips[0], uniform.trips[23])
    with pytest.raises(DemandError):
        expand_daily_to_hourly(daily, np.full(24, 0.05))


def test_expected_generation():
    od = one_pair(120, hours=2)
    assert expected_generation(od, 0, 0, 300) == pytest.approx(10.0)
    assert expected_generation(od, 1, 0, 300) == 0.0
    trips = np.zeros((2, 2, 2))
    trips[0, 0, 1] = 60
    trips[1, 0, 1] = 120
    od = ODMatrix(trips, (0, 1))
    assert expected_generation(od, 0, 3600 - 150, 3600 + 150) == pytest.approx(7.5)
    rng = np.random.default_rng(1)
    od = ODMatrix(rng.uniform(0, 50, (3, 5, 5)), tuple(range(5)))
    total = expected_generation(od, None, 1000, 8000)
    assert sum(expected_generation(od, z, 1000, 8000) for z in range(5)) == pytest.approx(total)
    assert expected_generation_by_zone(od, 1000, 8000).sum() == pytest.approx(total)


def test_od_validation():
    with pytest.raises(DemandError):
        ODMatrix(-np.ones((1, 2, 2)), (0, 1))
    with pytest.raises(DemandError):
        ODMatrix(np.ones((1, 2, 2)), (0, 1, 2))
