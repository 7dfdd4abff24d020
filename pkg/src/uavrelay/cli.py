"""Command line entry point: ``uavrelay <command> [options]``.

Exit codes: 0 success, 1 usage or input error, 2 infeasible, 3 resource limit.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .harness import (
    ConfigError,
    ExperimentConfig,
    SnapshotWorld,
    load_config,
    read_results_csv,
    report,
    run_experiment,
    scenario_for,
    summarize,
    write_summary_csv,
)
from .netgraph import parse_grid_shape
from .radio import CoverageInfeasibleError, coverage_radii
from .scenario import ScenarioError, save_scenario
from .solvers import solve_dmlp, solve_milp, verify_decision

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_LIMIT = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"\n{self.prog}: error: {message}\n")


def _common(p, *, solve=True, sim=True):
    p.add_argument("--config", help="TOML experiment config")
    p.add_argument("--seed", type=int, help="run seed (overrides the config's seed list)")
    p.add_argument("--clusters", type=int, help="number of clusters")
    p.add_argument("--snapshots", type=int, help="number of snapshots")
    p.add_argument("--redraw-demand-each-snapshot", action="store_true", default=None,
                   help="draw fresh UE demand at every snapshot")
    if solve:
        p.add_argument("--grid", help="candidate grid as RxC, e.g. 10x10")
        p.add_argument("--nmax", type=int, help="UAV budget")
        p.add_argument("--phi", type=float, help="deployment-cost weight")
        p.add_argument("--alpha", type=float, help="relocation weight")
        p.add_argument("--capacity-a2g", type=float, help="A2G link capacity (Mbps)")
        p.add_argument("--capacity-a2a", type=float, help="A2A link capacity (Mbps)")
        p.add_argument("--node-limit", type=int, help="branch-and-bound node limit")
    if sim:
        p.add_argument("--no-timing", action="store_true",
                       help="write 0 for wall times so outputs are reproducible byte for byte")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uavrelay", description="UAV relay placement and routing experiments")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("radii", help="print coverage radii for a propagation config")
    p.add_argument("--config")

    p = sub.add_parser("generate", help="synthesize a scenario file")
    _common(p, solve=False, sim=False)
    p.add_argument("--out", required=True, help="output scenario JSON path")

    p = sub.add_parser("solve", help="solve one snapshot")
    _common(p)
    p.add_argument("--scenario", help="scenario JSON (default: generate from config/seed)")
    p.add_argument("--t", type=int, default=0, help="snapshot index")
    p.add_argument("--solver", choices=("milp", "dmlp"), default="dmlp")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("simulate", help="run a snapshot sequence")
    _common(p)
    p.add_argument("--scenario", help="scenario JSON (default: generate from config/seed)")
    p.add_argument("--solver", choices=("milp", "dmlp", "static", "both"))
    p.add_argument("--out", help="output directory (default: from config)")

    p = sub.add_parser("report", help="aggregate existing results CSVs")
    p.add_argument("csv", nargs="+")
    p.add_argument("--out", required=True, help="summary CSV path")
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    changes = {}
    get = lambda name: getattr(args, name, None)  # noqa: E731
    if get("seed") is not None:
        changes["seeds"] = (args.seed,)
    if get("clusters") is not None:
        changes["clusters"] = args.clusters
    if get("snapshots") is not None:
        changes["mobility"] = dataclasses.replace(cfg.mobility, num_snapshots=args.snapshots)
    if get("redraw_demand_each_snapshot"):
        changes["redraw_demand"] = True
    if get("grid") is not None:
        changes["grid"] = parse_grid_shape(args.grid)
    solve = {k: get(a) for k, a in (("n_max", "nmax"), ("phi", "phi"), ("alpha", "alpha"))
             if get(a) is not None}
    if solve:
        changes["solve"] = dataclasses.replace(cfg.solve, **solve)
    cap = {k: get(a) for k, a in (("cap_a2g", "capacity_a2g"), ("cap_a2a", "capacity_a2a"))
           if get(a) is not None}
    if cap:
        changes["capacity"] = dataclasses.replace(cfg.capacity, **cap)
    if get("node_limit") is not None:
        changes["node_limit"] = args.node_limit
    if get("solver") is not None and args.command == "simulate":
        changes["solver"] = args.solver
    if get("scenario") is not None:
        changes["scenario_file"] = args.scenario
    if get("no_timing"):
        changes["record_timing"] = False
    if get("out") is not None and args.command == "simulate":
        changes["out_dir"] = args.out
    return dataclasses.replace(cfg, **changes)


def _cmd_radii(args) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    r = coverage_radii(cfg.propagation, cfg.budget_a2g, cfg.budget_a2a)
    print(f"R1 (A2G) = {r.r1_a2g:.1f} m  at {r.loss_budget_a2g:g} dB")
    print(f"R2 (A2A) = {r.r2_a2a:.1f} m  at {r.loss_budget_a2a:g} dB")
    return EXIT_OK


def _cmd_generate(args) -> int:
    cfg = _config(args)
    sc = scenario_for(dataclasses.replace(cfg, scenario_file=None), cfg.seeds[0])
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_scenario(sc, args.out)
    print(f"wrote {args.out}: {len(sc.clusters)} clusters, {len(sc.snapshots)} snapshots")
    return EXIT_OK


def _cmd_solve(args) -> int:
    cfg = _config(args)
    world = SnapshotWorld(cfg, scenario_for(cfg, cfg.seeds[0]))
    if not 0 <= args.t < len(world):
        raise ConfigError(f"snapshot {args.t} out of range (0..{len(world) - 1})")
    net, dem = world.graphs(args.t)
    scfg, prev = world.model_inputs(0, np.zeros(len(world.grid)))
    if args.solver == "milp":
        dec = solve_milp(net, dem, scfg, prev, node_limit=cfg.node_limit)
    else:
        dec = solve_dmlp(net, dem, scfg, prev)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    record = dec.to_dict(net, dem)
    record["audit"] = verify_decision(dec, net, dem, scfg, prev) if dec.feasible else None
    if not cfg.record_timing:
        record["wall_time"] = 0.0
    (out / "decision.json").write_text(json.dumps(record, indent=2) + "\n")
    net.write_csv(out / "network.csv")
    print(f"{dec.solver}: status={dec.status} uavs={dec.uav_count} "
          f"supported={dec.supported_fraction(dem):.4f} objective={dec.objective:.6g}")
    if dec.status == "infeasible":
        return EXIT_INFEASIBLE
    if dec.status == "node_limit":
        return EXIT_LIMIT
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = _config(args)
    metrics = run_experiment(cfg)
    results, summary = report(metrics, cfg.out_dir, cfg.record_timing)
    for row in summarize(metrics):
        print(f"{row['solver']:>6}: uavs={row['mean_uav_count']:.3f} "
              f"supported={row['mean_supported_fraction']:.4f} objective={row['mean_objective']:.6g}")
    print(f"wrote {results} and {summary}")
    statuses = {m.status for m in metrics}
    if "node_limit" in statuses:
        return EXIT_LIMIT
    if "infeasible" in statuses:
        return EXIT_INFEASIBLE
    return EXIT_OK


def _cmd_report(args) -> int:
    metrics = []
    for path in args.csv:
        metrics += read_results_csv(path)
    if not metrics:
        raise ConfigError("no rows in the given CSV files")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    summary = summarize(metrics)
    write_summary_csv(summary, args.out)
    for row in summary:
        print(f"{row['solver']:>6}: snapshots={row['snapshots']} "
              f"supported={row['mean_supported_fraction']:.4f}")
    return EXIT_OK


_COMMANDS = {"radii": _cmd_radii, "generate": _cmd_generate, "solve": _cmd_solve,
             "simulate": _cmd_simulate, "report": _cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ScenarioError, CoverageInfeasibleError, FileNotFoundError,
            ValueError) as exc:
        print(f"uavrelay {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
