import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from uavrelay.netgraph import (  # noqa: E402
    CapacityModel,
    build_demand_graph,
    build_grid,
    build_network_graph,
    reach_sets,
)
from uavrelay.radio import PropagationParams, coverage_radii  # noqa: E402
from uavrelay.scenario import MobilityConfig, Region, Snapshot, TrafficGenConfig, build_scenario  # noqa: E402
from uavrelay.uprmodel import SolveConfig  # noqa: E402

DATA = Path(__file__).resolve().parent.parent / "data"
RADII = coverage_radii(PropagationParams(), 110.0, 110.0)


def make_instance(seed, *, clusters=3, grid=(3, 3), size=4000.0, n_max=3, phi=0.1,
                  cap=5.0, flow_prob=0.04, snapshots=1):
    """Seeded desk-scale instance: ``(scenario, grid, nets, dems, cfg)``."""
    region = Region(size, size)
    radius = min(1000.0, size / 4)
    sc = build_scenario(region=region, m=clusters, radius=radius,
                        traffic=TrafficGenConfig(flow_prob=flow_prob, rng_seed=seed),
                        mobility=MobilityConfig(num_snapshots=snapshots), seed=seed)
    g = build_grid(region, *grid)
    capm = CapacityModel(cap_a2g=cap, cap_a2a=cap)
    nets = [build_network_graph(s, g, RADII, capm) for s in sc.snapshots]
    dems = [build_demand_graph(s) for s in sc.snapshots]
    return sc, g, nets, dems, SolveConfig(n_max=n_max, phi=phi)


def two_ch_example():
    """Two CHs 4000 m apart on a 1000 m site lattice, 0.2 Mbps each way."""
    region = Region(6000.0, 2000.0)
    g = build_grid(region, 2, 6)
    snap = Snapshot(0, [[1000.0, 1000.0], [5000.0, 1000.0]], [[0, 0.2], [0.2, 0]])
    net = build_network_graph(snap, g, RADII, CapacityModel())
    return net, build_demand_graph(snap), g


@pytest.fixture
def small_instance():
    return make_instance(3)


def mobility_cfg(cfg, reach=1375.0):
    return replace(cfg, mobility_enabled=True, vmax_times_dt=reach)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
