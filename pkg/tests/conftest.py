import time

import pytest

from savsim.scenario import ScenarioConfig, run_baseline, run_sav
from savsim.synthetic import GRID_FLEET_SIZE, GRID_REGISTERED_VEHICLES, grid_inputs


def grid_config(**overrides):
    base = dict(fleet_size=GRID_FLEET_SIZE, warm_up=3600.0, registered_vehicles=GRID_REGISTERED_VEHICLES, seed=1)
    base.update(overrides)
    return ScenarioConfig(**base)


@pytest.fixture(scope="session")
def grid():
    return grid_inputs()


@pytest.fixture(scope="session")
def grid_runs(grid):
    """Baseline and SAV runs on the default grid, with per-step invariant checks."""
    cfg = grid_config()
    t0 = time.perf_counter()
    base = run_baseline(cfg, grid)
    sav = run_sav(cfg, grid, check=True)
    return base, sav, time.perf_counter() - t0
