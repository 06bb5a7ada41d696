"""
Seeding, balancing and matching a fleet
=======================================

The dispatcher places the fleet in proportion to trip generation, scores
each zone by supply share minus demand share, moves surplus parked
vehicles toward deficits, and matches travelers to the nearest vehicle.
"""

import numpy as np

from savsim.demand import TripRequest
from savsim.dispatcher import BlockBalanceReport, initial_distribution, match, relocate

# %%
# Ten vehicles over four zones.
generation = np.array([30.0, 10.0, 45.0, 15.0])
seed = initial_distribution(10, generation)
print("initial fleet", seed.tolist(), "exact", (10 * generation / generation.sum()).round(2).tolist())

# %%
# A lopsided morning: zone 0 is full, zone 3 expects most of the demand.
parked = np.array([18, 4, 3, 0])
expected = np.array([2.0, 3.0, 4.0, 21.0])
report = BlockBalanceReport.compute(0.0, parked, 25, expected)
print("balances", report.values.round(2).tolist())
neighbors = [[1, 3], [0, 2], [1, 3], [2, 0]]  # a ring
res = relocate(report.values, parked, neighbors, thresholds=(-5, 5), radius=2)
print("moves", res.moves)
print("after", res.balances.round(2).tolist(), "still outside the band:", res.residual)

# %%
# Matching: first come, first served, nearest vehicle wins.
requests = [TripRequest(i, 0, 1, 30.0 * (i // 2)) for i in range(4)]
eta = {0: [120.0, 400.0, 90.0], 1: [100.0, 80.0, 700.0], 2: [300.0, 200.0, 60.0], 3: [50.0, 50.0, 50.0]}
result = match(requests, [101, 102, 103], lambda r: np.array(eta[r.id]), max_wait=600.0)
print("assignments (request, vehicle, eta):", result.assignments)
print("waitlisted:", result.waitlist)
