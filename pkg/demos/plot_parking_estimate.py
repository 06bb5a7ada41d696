"""
Parking demand from land use
============================

Static demand comes from floor area times a generation rate per land-use
type, plus home garages split by household count. Regressing peak
arrivals on it through the origin gives a turnover rate, and the final
per-zone demand is arrivals times that rate.
"""

import numpy as np

from savsim.network import Zone
from savsim.parking import (decompose_reduction, estimate_baseline, repurposed_floor_space, slots_to_area)

zones = [
    Zone("harbour", 1, {"office": 42_000, "commerce": 15_000, "transport": 8_000}, households=120),
    Zone("market", 2, {"commerce": 30_000, "residence": 40_000}, households=900),
    Zone("hills", 3, {"residence": 150_000, "park": 30_000}, households=2100),
    Zone("works", 4, {"industry": 90_000, "office": 5_000}, households=200),
]
REGISTERED = 600
arrivals = np.array([610.0, 420.0, 260.0, 190.0])

# %%
est = estimate_baseline(zones, arrivals, rates=None, registered_vehicles=REGISTERED)
print("static demand", est.static_total.round(1).tolist())
print(f"turnover {est.turnover:.3f}, R2 {est.r_squared:.3f}")
print("final slots", est.final_slots.tolist(), "=", slots_to_area(est.final_slots.sum()), "m2")

# %%
# Suppose a shared fleet of 200 needs 120 station slots in total.
d = decompose_reduction(est.final_slots.sum(), 120, fleet_size=200, registered_vehicles=REGISTERED)
print(f"reduction {d.total_reduction:.0f} slots: fleet size {d.fleet_share:.1%}, "
      f"sharing efficiency {d.efficiency_share:.1%}")

# %%
# Freed land against existing office floor space at a floor-area ratio of 2.
freed = slots_to_area(est.final_slots[0])
print(f"harbour: {repurposed_floor_space(freed, 42_000, 2.0):.1%} more office floor space")
