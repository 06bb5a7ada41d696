"""
Write the grid fixture as CLI input files
=========================================

Produces ``grid_inputs/`` with ``net/{nodes,links}.csv``, ``net/zones.json``,
``od.csv`` and two config files, ready for::

    savsim run --config grid_inputs/sav.cfg --network-dir grid_inputs/net \\
        --od grid_inputs/od.csv --out runs/sav
"""

from pathlib import Path

from savsim.io import write_network_dir, write_od_csv
from savsim.synthetic import GRID_FLEET_SIZE, GRID_REGISTERED_VEHICLES, grid_inputs

out = Path(__file__).with_name("grid_inputs")
inputs = grid_inputs()
write_network_dir(inputs.network, out / "net")
write_od_csv(inputs.od, out / "od.csv")
common = f"""warm_up = 01:00
report_start = 07:00
report_end = 09:00
registered_vehicles = {GRID_REGISTERED_VEHICLES:g}
seed = 1
"""
(out / "baseline.cfg").write_text("scenario = baseline\n" + common)
(out / "sav.cfg").write_text(f"scenario = sav\nfleet_size = {GRID_FLEET_SIZE}\n" + common)
print("wrote", sorted(str(p.relative_to(out)) for p in out.rglob("*") if p.is_file()))
