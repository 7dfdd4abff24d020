import json
import math

import numpy as np
import pytest
from conftest import RADII, make_instance, mobility_cfg, two_ch_example
from oracles import enumerate_optimum

from uavrelay.netgraph import build_demand_graph, build_grid, build_network_graph, reach_sets
from uavrelay.scenario import Region, Snapshot
from uavrelay.solvers import (
    audit_ok,
    solve_dmlp,
    solve_fixed_placement,
    solve_milp,
    solve_relaxation,
    verify_decision,
)
from uavrelay.uprmodel import PrevPlacement, SolveConfig


def test_two_ch_example_needs_two_uavs():
    net, dem, _ = two_ch_example()
    cfg = SolveConfig(n_max=3, phi=0.1)
    dec = solve_milp(net, dem, cfg)
    ref, x_ref, _ = enumerate_optimum(net, dem, cfg.phi, cfg.n_max)
    assert dec.status == "optimal"
    assert dec.uav_count == 2 == x_ref.sum()
    np.testing.assert_allclose(dec.unsupported, 0.0, atol=1e-9)
    assert dec.objective == pytest.approx(ref, abs=1e-9)
    assert dec.objective == pytest.approx(0.1 * 2 / 3)
    # no single site reaches both cluster heads
    d = np.hypot(*(net.site_positions[:, None, :] - net.ch_positions[None, :, :]).transpose(2, 0, 1))
    assert not np.any(np.all(d <= RADII.r1_a2g, axis=1))


def test_two_ch_example_dmlp_matches():
    net, dem, _ = two_ch_example()
    cfg = SolveConfig(n_max=3)
    assert solve_dmlp(net, dem, cfg).objective == pytest.approx(solve_milp(net, dem, cfg).objective)


def test_no_commodities():
    g = build_grid(Region(4000.0, 4000.0), 2, 2)
    snap = Snapshot(0, [[1000.0, 1000.0], [3000.0, 3000.0]], np.zeros((2, 2)))
    net, dem = build_network_graph(snap, g, RADII), build_demand_graph(snap)
    cfg = SolveConfig(n_max=2)
    for dec in (solve_milp(net, dem, cfg), solve_dmlp(net, dem, cfg)):
        assert dec.uav_count == 0 and dec.objective == 0.0
        assert dec.supported_fraction(dem) == 1.0
    assert solve_dmlp(net, dem, cfg).lp_calls == 1


def test_no_uavs_available():
    _, _, nets, dems, _ = make_instance(1)
    cfg = SolveConfig(n_max=0, phi=0.1)
    for dec in (solve_milp(nets[0], dems[0], cfg), solve_dmlp(nets[0], dems[0], cfg)):
        assert dec.uav_count == 0
        np.testing.assert_allclose(dec.unsupported, dems[0].demand)
        assert dec.objective == pytest.approx(0.9)


@pytest.mark.parametrize("seed", range(10))
def test_milp_matches_enumeration(seed):
    _, _, nets, dems, cfg = make_instance(40 + seed, clusters=2 + seed % 3, n_max=1 + seed % 3)
    dec = solve_milp(nets[0], dems[0], cfg)
    ref, _, _ = enumerate_optimum(nets[0], dems[0], cfg.phi, cfg.n_max)
    assert dec.objective == pytest.approx(ref, abs=1e-6)


@pytest.mark.parametrize("seed", range(4))
def test_milp_with_mobility_matches_enumeration(seed):
    _, g, nets, dems, cfg = make_instance(60 + seed, clusters=3, snapshots=2)
    cfg = mobility_cfg(cfg)
    first = solve_milp(nets[0], dems[0], SolveConfig(n_max=cfg.n_max))
    prev = PrevPlacement(first.x, reach_sets(g, cfg.vmax_times_dt))
    dec = solve_milp(nets[1], dems[1], cfg, prev)
    ref, _, _ = enumerate_optimum(nets[1], dems[1], cfg.phi, cfg.n_max, cfg.alpha, first.x,
                                  prev.reach_sets)
    assert dec.objective == pytest.approx(ref, abs=1e-6)
    assert audit_ok(verify_decision(dec, nets[1], dems[1], cfg, prev))


@pytest.mark.parametrize("seed", range(8))
def test_sandwich_and_audit(seed):
    _, g, nets, dems, cfg = make_instance(80 + seed, clusters=2 + seed % 3, grid=(3, 4),
                                          snapshots=2, n_max=2 + seed % 2)
    lp = solve_relaxation(nets[0], dems[0], cfg)
    ex = solve_milp(nets[0], dems[0], cfg)
    heur = solve_dmlp(nets[0], dems[0], cfg)
    assert lp <= ex.objective + 1e-6 <= heur.objective + 2e-6
    for dec in (ex, heur):
        assert audit_ok(verify_decision(dec, nets[0], dems[0], cfg))
    # second snapshot with mobility, from the heuristic's placement
    mcfg = mobility_cfg(cfg)
    prev = PrevPlacement(heur.x, reach_sets(g, 1375.0))
    lp = solve_relaxation(nets[1], dems[1], mcfg, prev)
    ex = solve_milp(nets[1], dems[1], mcfg, prev)
    heur = solve_dmlp(nets[1], dems[1], mcfg, prev)
    assert lp <= ex.objective + 1e-6 <= heur.objective + 2e-6
    for dec in (ex, heur):
        rep = verify_decision(dec, nets[1], dems[1], mcfg, prev)
        assert audit_ok(rep) and rep["reach"] == 0.0


def test_dmlp_lp_objectives_non_decreasing():
    for seed in range(10):
        _, _, nets, dems, cfg = make_instance(120 + seed, clusters=3, grid=(4, 4), n_max=4)
        dec = solve_dmlp(nets[0], dems[0], cfg)
        objs = dec.lp_objectives
        assert len(objs) == dec.lp_calls <= cfg.n_max + 1
        assert all(b >= a - 1e-9 for a, b in zip(objs, objs[1:]))


def test_dmlp_stops_at_budget():
    _, _, nets, dems, _ = make_instance(7, clusters=4, grid=(4, 4), flow_prob=0.3)
    dec = solve_dmlp(nets[0], dems[0], SolveConfig(n_max=1))
    assert dec.uav_count <= 1 and dec.lp_calls <= 2


def test_dmlp_keeps_reach_constraints():
    for seed in range(6):
        _, g, nets, dems, cfg = make_instance(140 + seed, clusters=3, grid=(4, 4), snapshots=3,
                                              size=5000.0)
        mcfg = mobility_cfg(cfg)
        x = solve_dmlp(nets[0], dems[0], cfg).x
        for t in (1, 2):
            prev = PrevPlacement(x, reach_sets(g, 1375.0))
            dec = solve_dmlp(nets[t], dems[t], mcfg, prev)
            assert dec.status == "complete"
            for i in prev.occupied:
                assert dec.x[prev.reach_sets[i]].sum() >= 1
            assert dec.z_value == float(np.max(np.abs(dec.x - x)))
            x = dec.x


def test_infeasible_reach_requirement():
    _, g, nets, dems, cfg = make_instance(3, grid=(3, 3))
    x_prev = np.zeros(9, dtype=int)
    x_prev[[0, 8]] = 1
    prev = PrevPlacement(x_prev, reach_sets(g, 0.0))
    mcfg = mobility_cfg(SolveConfig(n_max=1), reach=0.0)
    for dec in (solve_milp(nets[0], dems[0], mcfg, prev), solve_dmlp(nets[0], dems[0], mcfg, prev)):
        assert dec.status == "infeasible" and not dec.feasible
        assert math.isinf(dec.objective)


def test_node_limit_returns_incumbent_status():
    for seed in range(20):
        _, _, nets, dems, cfg = make_instance(seed, clusters=4, grid=(4, 4), n_max=4)
        full = solve_milp(nets[0], dems[0], cfg)
        if full.nodes > 3:
            break
    else:
        pytest.skip("no instance with a branching tree")
    limited = solve_milp(nets[0], dems[0], cfg, node_limit=2)
    assert limited.status == "node_limit"
    assert limited.nodes == 2
    assert limited.objective >= full.objective - 1e-9


def test_deterministic():
    _, _, nets, dems, cfg = make_instance(9, clusters=3, grid=(4, 4))
    for solve in (solve_milp, solve_dmlp):
        a, b = solve(nets[0], dems[0], cfg), solve(nets[0], dems[0], cfg)
        assert np.array_equal(a.x, b.x) and np.array_equal(a.flows, b.flows)
        assert a.objective == b.objective and a.lp_calls == b.lp_calls


def test_audit_flags_corrupted_flow():
    _, _, nets, dems, cfg = make_instance(2, clusters=3)
    dec = solve_milp(nets[0], dems[0], cfg)
    assert audit_ok(verify_decision(dec, nets[0], dems[0], cfg))
    e = int(np.flatnonzero(dec.flows.sum(axis=1) > 0)[0])
    dec.flows[e, 0] += 1.0
    rep = verify_decision(dec, nets[0], dems[0], cfg)
    assert rep["conservation"] >= 1.0 - 1e-9
    dec.flows[e, 0] += 10.0
    rep = verify_decision(dec, nets[0], dems[0], cfg)
    assert rep["capacity"] > 1.0 and not audit_ok(rep)


def test_audit_flags_gate_and_budget():
    _, _, nets, dems, cfg = make_instance(2, clusters=3)
    dec = solve_milp(nets[0], dems[0], cfg)
    used = np.flatnonzero(dec.x)
    dec.x[used[0]] = 0
    rep = verify_decision(dec, nets[0], dems[0], cfg)
    assert max(rep["tail_gate"], rep["head_gate"]) > 0
    dec.x[:] = 1
    assert verify_decision(dec, nets[0], dems[0], cfg)["budget"] > 0


def test_audit_flags_move_outside_reach():
    _, g, nets, dems, cfg = make_instance(3, grid=(3, 3))
    x_prev = np.zeros(9, dtype=int)
    x_prev[0] = 1
    prev = PrevPlacement(x_prev, reach_sets(g, 1375.0))
    mcfg = mobility_cfg(cfg)
    dec = solve_fixed_placement(nets[0], dems[0], cfg, np.eye(9, dtype=int)[8])
    rep = verify_decision(dec, nets[0], dems[0], mcfg, prev)
    assert rep["reach"] == 1.0


def test_fixed_placement_matches_milp_on_its_own_answer():
    _, _, nets, dems, cfg = make_instance(5, clusters=3)
    ex = solve_milp(nets[0], dems[0], cfg)
    fx = solve_fixed_placement(nets[0], dems[0], cfg, ex.x)
    assert fx.objective == pytest.approx(ex.objective, abs=1e-9)


def test_decision_record(tmp_path):
    net, dem, _ = two_ch_example()
    dec = solve_dmlp(net, dem, SolveConfig(n_max=3))
    rec = json.loads(dec.to_json(net, dem))
    assert rec["solver"] == "dmlp" and len(rec["sites"]) == 2
    assert {c["src"] for c in rec["commodities"]} == {"CH1", "CH2"}
    assert all(f["mbps"] > 1e-6 for f in rec["flows"])
    assert rec["lp_calls"] == dec.lp_calls
