import json

import numpy as np
import pytest
from conftest import DATA

from uavrelay.scenario import (
    Cluster,
    MalformedScenarioError,
    MobilityConfig,
    OrphanUeError,
    Region,
    ScenarioSchemaError,
    Snapshot,
    TrafficGenConfig,
    UeDemandMatrix,
    UnsupportedVersionError,
    advance_snapshot,
    aggregate_td,
    build_scenario,
    generate_clusters,
    generate_demand,
    load_scenario,
    save_scenario,
)

REGION = Region()


def _two_clusters():
    a = Cluster(1, [1000, 1000], [[1000, 1000], [1100, 1000]], 500.0)
    b = Cluster(2, [5000, 5000], [[5000, 5000]], 500.0)
    return [a, b]


def test_clusters_deterministic():
    a = generate_clusters(REGION, 9, seed=5)
    b = generate_clusters(REGION, 9, seed=5)
    assert a == b
    assert generate_clusters(REGION, 9, seed=6) != a


def test_ues_inside_cluster_disc():
    for c in generate_clusters(REGION, 9, radius=1000.0, seed=1):
        assert np.all(np.hypot(*(c.ues - c.ch).T) <= 1000.0 + 1e-9)
        # the whole disc fits inside the region
        assert 1000.0 <= c.ch[0] <= 9000.0 and 1000.0 <= c.ch[1] <= 9000.0
        assert len(c.ues) >= 1


def test_mean_ue_count_near_density():
    big = Region(100_000.0, 100_000.0)
    counts = [len(c.ues) for s in range(5) for c in generate_clusters(big, 100, 10.0, 1000.0, s)]
    # Poisson(10) sample mean over 500 draws has sd ~0.14
    assert 9.0 <= np.mean(counts) <= 11.0


def test_cluster_generation_errors():
    with pytest.raises(ValueError):
        generate_clusters(REGION, 0)
    with pytest.raises(ValueError):
        generate_clusters(Region(1500.0, 1500.0), 3, radius=1000.0)


def test_demand_zero_probability():
    cl = generate_clusters(REGION, 3, seed=0)
    assert len(generate_demand(cl, TrafficGenConfig(flow_prob=0.0))) == 0


def test_demand_certain_flow_on_every_inter_cluster_pair():
    cl = generate_clusters(REGION, 3, seed=0)
    d = generate_demand(cl, TrafficGenConfig(flow_prob=1.0, demand_levels=(0.2,)))
    sizes = [len(c.ues) for c in cl]
    n = sum(sizes)
    assert len(d) == n * n - sum(s * s for s in sizes)
    assert set(d.entries.values()) == {0.2}
    owner = np.repeat(np.arange(3), sizes)
    assert all(owner[u] != owner[v] for u, v in d.entries)


def test_demand_flow_frequency():
    cl = generate_clusters(REGION, 2, density_mean=10, seed=0)
    pairs = 2 * len(cl[0].ues) * len(cl[1].ues)
    hits = sum(len(generate_demand(cl, TrafficGenConfig(), seed=s)) for s in range(400))
    assert hits / (400 * pairs) == pytest.approx(0.04, abs=0.01)


def test_demand_levels_drawn_from_config():
    cl = generate_clusters(REGION, 4, seed=2)
    d = generate_demand(cl, TrafficGenConfig(flow_prob=0.5, demand_levels=(0.2, 0.4, 0.6)))
    assert set(d.entries.values()) <= {0.2, 0.4, 0.6}


def test_ch_pair_mode_one_flow_per_cluster_pair():
    cl = generate_clusters(REGION, 4, seed=2)
    d = generate_demand(cl, TrafficGenConfig(flow_prob=1.0, pair_mode="ch"))
    td = aggregate_td(cl, d)
    assert np.count_nonzero(td) == 12


def test_td_singleton_and_additivity():
    cl = _two_clusters()
    td = aggregate_td(cl, UeDemandMatrix({(0, 2): 0.4}, 3))
    assert td.tolist() == [[0.0, 0.4], [0.0, 0.0]]
    td = aggregate_td(cl, UeDemandMatrix({(0, 2): 0.2, (1, 2): 0.6}, 3))
    assert td[0, 1] == pytest.approx(0.8)


def test_td_matches_double_loop():
    rng = np.random.default_rng(0)
    cl = generate_clusters(REGION, 3, seed=4)
    n = sum(len(c.ues) for c in cl)
    entries = {}
    for _ in range(60):
        u, v = rng.integers(0, n, size=2)
        if u != v:
            entries[(int(u), int(v))] = float(rng.choice([0.2, 0.4, 0.6]))
    d = UeDemandMatrix(entries, n)
    ref = np.zeros((3, 3))
    start = 0
    for i, ci in enumerate(cl):
        members_i = range(start, start + len(ci.ues))
        start_j = 0
        for j, cj in enumerate(cl):
            members_j = range(start_j, start_j + len(cj.ues))
            if i != j:
                for u in members_i:
                    for v in members_j:
                        ref[i, j] += entries.get((u, v), 0.0)
            start_j += len(cj.ues)
        start += len(ci.ues)
    # equal up to the order of floating-point additions
    np.testing.assert_allclose(aggregate_td(cl, d), ref, rtol=0, atol=1e-12)


def test_orphan_ue_rejected():
    with pytest.raises(OrphanUeError):
        aggregate_td(_two_clusters(), UeDemandMatrix({(0, 7): 0.2}, 8))


def test_zero_speed_is_a_fixed_point():
    snap = Snapshot(0, [[100.0, 200.0], [3000.0, 4000.0]], np.zeros((2, 2)))
    mob = MobilityConfig(speed_min=0.0, speed_max=0.0)
    nxt = advance_snapshot(snap, mob, REGION, seed=1)
    np.testing.assert_array_equal(nxt.ch_positions, snap.ch_positions)
    assert nxt.t == 1


def test_arrival_clamps_to_waypoint():
    snap = Snapshot(0, [[100.0, 100.0]], [[0.0]], waypoints=[[150.0, 100.0]], speeds=[40.0])
    nxt = advance_snapshot(snap, MobilityConfig(), REGION, seed=0)
    np.testing.assert_array_equal(nxt.ch_positions[0], [150.0, 100.0])
    # a fresh leg is drawn after arrival
    assert not np.array_equal(nxt.waypoints[0], [150.0, 100.0])


def test_partial_step_moves_speed_times_dt():
    snap = Snapshot(0, [[0.0, 0.0]], [[0.0]], waypoints=[[3000.0, 4000.0]], speeds=[20.0])
    nxt = advance_snapshot(snap, MobilityConfig(), REGION, seed=0)
    np.testing.assert_allclose(nxt.ch_positions[0], [300.0, 400.0])


def test_displacement_bound_and_region():
    mob = MobilityConfig(num_snapshots=101)
    steps = 0
    for seed in range(10):
        sc = build_scenario(m=3, seed=seed, mobility=mob)
        for a, b in zip(sc.snapshots, sc.snapshots[1:]):
            step = np.hypot(*(b.ch_positions - a.ch_positions).T)
            assert np.all(step <= 40.0 * 25.0 + 1e-9)
            assert REGION.contains(b.ch_positions)
            steps += step.size
    assert steps >= 1000


def test_demand_persists_by_default_and_redraws_on_request():
    sc = build_scenario(m=4, seed=3, mobility=MobilityConfig(num_snapshots=4))
    assert all(np.array_equal(s.td, sc.snapshots[0].td) for s in sc.snapshots)
    sc = build_scenario(m=4, seed=3, mobility=MobilityConfig(num_snapshots=4), redraw_demand=True)
    assert any(not np.array_equal(s.td, sc.snapshots[0].td) for s in sc.snapshots[1:])


def test_td_invariants():
    sc = build_scenario(m=5, seed=8, mobility=MobilityConfig(num_snapshots=3))
    for s in sc.snapshots:
        assert np.all(np.diag(s.td) == 0) and np.all(s.td >= 0)
    with pytest.raises(ValueError):
        Snapshot(0, [[0, 0], [1, 1]], [[0.2, 0], [0, 0]])


def test_group_members_translate_with_ch():
    sc = build_scenario(m=3, seed=2, mobility=MobilityConfig(num_snapshots=3))
    ues = sc.ue_positions_at(2)
    for c, moved, ch in zip(sc.clusters, ues, sc.snapshots[2].ch_positions):
        np.testing.assert_allclose(moved - ch, c.ues - c.ch)


def test_generation_is_deterministic():
    a = build_scenario(m=4, seed=12, mobility=MobilityConfig(num_snapshots=5))
    b = build_scenario(m=4, seed=12, mobility=MobilityConfig(num_snapshots=5))
    assert a == b


def test_round_trip(tmp_path):
    sc = build_scenario(m=9, seed=1, mobility=MobilityConfig(num_snapshots=4))
    path = tmp_path / "s.json"
    save_scenario(sc, path)
    back = load_scenario(path)
    assert back == sc
    assert back.snapshots[3] == sc.snapshots[3]


def test_truncated_file(tmp_path):
    sc = build_scenario(m=3, seed=1, mobility=MobilityConfig(num_snapshots=2))
    path = tmp_path / "s.json"
    save_scenario(sc, path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(MalformedScenarioError):
        load_scenario(path)


def test_unknown_version(tmp_path):
    sc = build_scenario(m=3, seed=1, mobility=MobilityConfig(num_snapshots=2))
    data = sc.to_dict()
    data["version"] = 99
    path = tmp_path / "s.json"
    path.write_text(json.dumps(data))
    with pytest.raises(UnsupportedVersionError):
        load_scenario(path)


def test_schema_mismatch(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"version": 1, "region": {"width": 10}}))
    with pytest.raises(ScenarioSchemaError):
        load_scenario(path)
    path.write_text("[1, 2]")
    with pytest.raises(ScenarioSchemaError):
        load_scenario(path)


def test_golden_scenario_loads():
    sc = load_scenario(DATA / "golden_scenario.json")
    assert len(sc.clusters) == 3 and len(sc.snapshots) == 5
    assert sc.region == Region(5000.0, 5000.0)
