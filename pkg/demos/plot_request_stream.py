"""
From hourly OD to 30-second requests
====================================

Hourly OD rates are cut into 120 bins. Fractions of a vehicle are carried
forward per OD pair, so each hour's total comes out whole.
"""

import numpy as np

from savsim.demand import RequestStream, expand_daily_to_hourly, expected_generation

# %%
# A daily matrix spread over the day by hourly coefficients.
daily = np.array([[0.0, 2400.0, 300.0], [900.0, 0.0, 150.0], [80.0, 40.0, 0.0]])
coef = np.full(24, 0.02)
coef[7], coef[8] = 0.18, 0.14
coef /= coef.sum()
od = expand_daily_to_hourly(daily, coef, ("north", "centre", "south"))
print("hour 7 trips:\n", np.round(od.trips[7], 2))

# %%
# Emit hour 7 bin by bin.
stream = RequestStream(od)
per_bin = []
for k in range(120):
    per_bin.append(len(stream.emit(7 * 3600 + 30 * k)))
print("requests per bin (first 20):", per_bin[:20])
print("hour total", sum(per_bin), "vs matrix", od.trips[7].sum())

# %%
# What the dispatcher expects over the next five minutes.
for z, name in enumerate(od.zone_ids):
    print(f"{name:>7}: {expected_generation(od, z, 7.5 * 3600, 7.5 * 3600 + 300):.2f} trips")
