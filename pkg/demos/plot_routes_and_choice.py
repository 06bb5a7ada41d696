"""
Routes and logit choice on a grid
=================================

The router returns up to k loopless routes by travel time; a multinomial
logit spreads vehicles over them. Larger theta concentrates choice on the
fastest route.
"""

import numpy as np

from savsim.flow import choose_route, logit_probabilities
from savsim.routing import TravelTimeTable, k_shortest_routes
from savsim.synthetic import grid_network

net = grid_network()
table = TravelTimeTable.free_flow(net)

# %%
# On an empty grid every monotone corner-to-corner path ties at 8 x 50 s.
# Ties resolve by link ids, so the result is the same on every run.
routes = k_shortest_routes(net, 0, 24, table, k=3)
for r in routes:
    print(f"{r.cost:6.1f} s  " + " ".join(str(net.links[li].id) for li in r.links))

# %%
# Give every link some congestion and ask again; the ties break apart.
slow = table.times * np.random.default_rng(3).uniform(1.0, 1.6, len(table.times))
routes = k_shortest_routes(net, 0, 24, TravelTimeTable(slow, version=1), k=3)
for theta in (0.0, 0.01, 0.1):
    p = logit_probabilities([r.cost for r in routes], theta)
    print(f"theta {theta:<5} costs {[round(r.cost) for r in routes]} shares {np.round(p, 3)}")

rng = np.random.default_rng(0)
picks = np.bincount([choose_route(routes, 0.01, rng) for _ in range(5000)], minlength=len(routes))
print("sampled shares at theta 0.01:", np.round(picks / picks.sum(), 3))
