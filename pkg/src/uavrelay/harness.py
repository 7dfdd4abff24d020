"""Multi-snapshot experiments: configuration, the per-snapshot loop and reports."""
from __future__ import annotations

import csv
import dataclasses
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .netgraph import (
    CapacityModel,
    build_demand_graph,
    build_grid,
    build_network_graph,
    parse_grid_shape,
    reach_sets,
)
from .radio import PropagationParams, coverage_radii
from .scenario import (
    MobilityConfig,
    Region,
    Scenario,
    TrafficGenConfig,
    build_scenario,
    load_scenario,
)
from .solvers import (
    PlacementDecision,
    solve_dmlp,
    solve_fixed_placement,
    solve_milp,
    verify_decision,
)
from .uprmodel import PrevPlacement, SolveConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SOLVER_MODES = ("milp", "dmlp", "static", "both")
CSV_COLUMNS = ("run_seed", "t", "solver", "uav_count", "supported_fraction", "relocation",
               "objective", "lp_calls", "wall_time_s")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs besides its seed.

    ``scenario_file`` replaces scenario generation when set; the generation
    fields are then ignored except ``num_snapshots``, which truncates.
    """

    propagation: PropagationParams = PropagationParams()
    budget_a2g: float = 110.0
    budget_a2a: float = 110.0
    region: Region = Region()
    grid: tuple = (10, 10)
    clusters: int = 9
    density_mean: float = 10.0
    cluster_radius: float = 1000.0
    traffic: TrafficGenConfig = TrafficGenConfig()
    redraw_demand: bool = False
    mobility: MobilityConfig = MobilityConfig()
    mobility_constraints: bool = True
    capacity: CapacityModel = CapacityModel()
    solver: str = "dmlp"
    solve: SolveConfig = SolveConfig(n_max=6)
    node_limit: int = 1_000_000
    seeds: tuple = (0,)
    out_dir: str = "results"
    record_timing: bool = True
    scenario_file: str | None = None

    def __post_init__(self):
        if self.solver not in SOLVER_MODES:
            raise ConfigError(f"solver must be one of {SOLVER_MODES}, got {self.solver!r}")
        if len(self.grid) != 2 or min(self.grid) < 1:
            raise ConfigError("grid must be (rows, cols) with both >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.node_limit < 1:
            raise ConfigError("node_limit must be positive")


@dataclass
class SnapshotMetrics:
    run_seed: int
    t: int
    solver: str
    uav_count: int
    supported_fraction: float
    relocation: float
    objective: float
    lp_calls: int
    wall_time_s: float
    status: str = "optimal"
    audit_max: float = 0.0
    decision: PlacementDecision | None = field(default=None, repr=False, compare=False)

    def row(self, record_timing: bool = True) -> list:
        wall = self.wall_time_s if record_timing else 0.0
        return [self.run_seed, self.t, self.solver, self.uav_count, repr(float(self.supported_fraction)),
                repr(float(self.relocation)), repr(float(self.objective)), self.lp_calls,
                repr(float(wall))]


# --- config files ------------------------------------------------------------------

_SECTIONS = {
    "propagation": {"a", "b", "eta_los", "eta_nlos", "fc", "altitude_h", "noise_power", "snr_min",
                    "p_ue", "p_uav", "budget_a2g", "budget_a2a"},
    "region": {"width", "height", "grid"},
    "clusters": {"count", "density_mean", "radius"},
    "traffic": {"flow_prob", "demand_levels", "pair_mode", "redraw_each_snapshot"},
    "mobility": {"speed_min", "speed_max", "snapshot_duration", "uav_vmax", "num_snapshots",
                 "constraints"},
    "capacity": {"mode", "a2g", "a2a", "bandwidth_hz"},
    "solve": {"solver", "n_max", "phi", "alpha", "node_limit"},
    "output": {"dir", "seeds", "record_timing", "scenario_file"},
}


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a config from parsed TOML; unknown sections or keys are errors."""
    for sec, body in data.items():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown config section [{sec}]")
        extra = set(body) - _SECTIONS[sec]
        if extra:
            raise ConfigError(f"unknown key(s) in [{sec}]: {', '.join(sorted(extra))}")
    get = lambda sec: dict(data.get(sec, {}))  # noqa: E731

    try:
        prop = get("propagation")
        budgets = {k: prop.pop(k) for k in ("budget_a2g", "budget_a2a") if k in prop}
        region = get("region")
        grid = parse_grid_shape(str(region.pop("grid", "10x10")))
        cl = get("clusters")
        tr = get("traffic")
        redraw = bool(tr.pop("redraw_each_snapshot", False))
        mob = get("mobility")
        constraints = bool(mob.pop("constraints", True))
        cap = get("capacity")
        cap_kw = {k2: cap[k1] for k1, k2 in (("mode", "mode"), ("a2g", "cap_a2g"), ("a2a", "cap_a2a"),
                                             ("bandwidth_hz", "bandwidth_hz")) if k1 in cap}
        sv = get("solve")
        solver = sv.pop("solver", "dmlp")
        node_limit = int(sv.pop("node_limit", 1_000_000))
        sv.setdefault("n_max", 6)
        out = get("output")
        return ExperimentConfig(
            propagation=PropagationParams(**prop),
            region=Region(**region),
            grid=grid,
            clusters=int(cl.get("count", 9)),
            density_mean=float(cl.get("density_mean", 10.0)),
            cluster_radius=float(cl.get("radius", 1000.0)),
            traffic=TrafficGenConfig(**tr),
            redraw_demand=redraw,
            mobility=MobilityConfig(**mob),
            mobility_constraints=constraints,
            capacity=CapacityModel(**cap_kw),
            solver=solver,
            solve=SolveConfig(**sv),
            node_limit=node_limit,
            seeds=tuple(int(s) for s in out.get("seeds", [0])),
            out_dir=str(out.get("dir", "results")),
            record_timing=bool(out.get("record_timing", True)),
            scenario_file=out.get("scenario_file"),
            **budgets,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    """Read a TOML config; a relative ``scenario_file`` is taken from the config's folder."""
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    cfg = config_from_dict(data)
    if cfg.scenario_file and not Path(cfg.scenario_file).is_absolute():
        cfg = replace(cfg, scenario_file=str(Path(path).parent / cfg.scenario_file))
    return cfg


# --- runs ---------------------------------------------------------------------------


def scenario_for(cfg: ExperimentConfig, seed: int) -> Scenario:
    if cfg.scenario_file:
        sc = load_scenario(cfg.scenario_file)
        n = cfg.mobility.num_snapshots
        return dataclasses.replace(sc, snapshots=list(sc.snapshots[:n]))
    return build_scenario(region=cfg.region, m=cfg.clusters, density_mean=cfg.density_mean,
                          radius=cfg.cluster_radius, traffic=replace(cfg.traffic, rng_seed=seed),
                          mobility=cfg.mobility, propagation=cfg.propagation, seed=seed,
                          redraw_demand=cfg.redraw_demand)


class SnapshotWorld:
    """Graphs for every snapshot of one scenario, built once and shared by solvers."""

    def __init__(self, cfg: ExperimentConfig, scenario: Scenario):
        self.cfg = cfg
        self.scenario = scenario
        self.radii = coverage_radii(scenario.propagation, cfg.budget_a2g, cfg.budget_a2a)
        self.grid = build_grid(scenario.region, *cfg.grid, altitude=scenario.propagation.altitude_h)
        self.reach = reach_sets(self.grid, scenario.mobility.uav_reach)
        self._graphs = {}

    def __len__(self):
        return len(self.scenario.snapshots)

    def graphs(self, t: int):
        if t not in self._graphs:
            snap = self.scenario.snapshots[t]
            net = build_network_graph(snap, self.grid, self.radii, self.cfg.capacity,
                                      self.scenario.propagation)
            self._graphs[t] = (net, build_demand_graph(snap))
        return self._graphs[t]

    def model_inputs(self, t: int, x_prev):
        """Solve config and previous placement for snapshot ``t``.

        The first snapshot, and every snapshot when mobility constraints are
        off, is solved without reach rows or the relocation term.
        """
        base = self.cfg.solve
        if t == 0 or not self.cfg.mobility_constraints:
            return replace(base, mobility_enabled=False), None
        cfg = replace(base, mobility_enabled=True, vmax_times_dt=self.scenario.mobility.uav_reach)
        return cfg, PrevPlacement(np.asarray(x_prev, dtype=np.int8), self.reach)


def _metrics(seed, t, solver, dec: PlacementDecision, dem, audit) -> SnapshotMetrics:
    return SnapshotMetrics(
        run_seed=seed, t=t, solver=solver, uav_count=dec.uav_count,
        supported_fraction=dec.supported_fraction(dem) if dec.feasible else 0.0,
        relocation=float(dec.z_value or 0.0), objective=float(dec.objective),
        lp_calls=dec.lp_calls, wall_time_s=float(dec.wall_time), status=dec.status,
        audit_max=max(audit.values(), default=0.0) if dec.feasible else float("nan"),
        decision=dec)


def _run_chain(world: SnapshotWorld, solver: str, seed: int) -> list[SnapshotMetrics]:
    cfg = world.cfg
    out = []
    x_prev = np.zeros(len(world.grid), dtype=np.int8)
    frozen = None
    for t in range(len(world)):
        net, dem = world.graphs(t)
        scfg, prev = world.model_inputs(t, x_prev)
        if solver == "dmlp":
            dec = solve_dmlp(net, dem, scfg, prev)
        elif solver == "milp" or frozen is None:
            dec = solve_milp(net, dem, scfg, prev, node_limit=cfg.node_limit)
        else:
            dec = solve_fixed_placement(net, dem, scfg, frozen, prev, solver="static")
        if solver == "static" and frozen is None and dec.feasible:
            frozen = dec.x.copy()
        dec.solver = solver
        audit = verify_decision(dec, net, dem, scfg, prev) if dec.feasible else {}
        out.append(_metrics(seed, t, solver, dec, dem, audit))
        if dec.feasible:
            x_prev = dec.x
    return out


def run_snapshot_sequence(cfg: ExperimentConfig, seed: int | None = None) -> list[SnapshotMetrics]:
    """Solve every snapshot of one seeded run with the configured solver(s).

    Rows are ordered by snapshot, then solver (``milp`` before ``dmlp``).
    """
    seed = cfg.seeds[0] if seed is None else int(seed)
    world = SnapshotWorld(cfg, scenario_for(cfg, seed))
    solvers = ("milp", "dmlp") if cfg.solver == "both" else (cfg.solver,)
    chains = [_run_chain(world, s, seed) for s in solvers]
    return [m for group in zip(*chains) for m in group]


def run_experiment(cfg: ExperimentConfig) -> list[SnapshotMetrics]:
    rows = []
    for seed in cfg.seeds:
        rows += run_snapshot_sequence(cfg, seed)
    return rows


# --- reports ------------------------------------------------------------------------


def write_results_csv(metrics, path, record_timing: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for m in metrics:
            w.writerow(m.row(record_timing))


def read_results_csv(path) -> list[SnapshotMetrics]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [SnapshotMetrics(int(r["run_seed"]), int(r["t"]), r["solver"], int(r["uav_count"]),
                                float(r["supported_fraction"]), float(r["relocation"]),
                                float(r["objective"]), int(r["lp_calls"]), float(r["wall_time_s"]))
                for r in reader]


def summarize(metrics) -> list[dict]:
    """Per-solver means over all snapshots and runs, solvers in first-seen order."""
    groups = {}
    for m in metrics:
        groups.setdefault(m.solver, []).append(m)
    out = []
    for solver, ms in groups.items():
        row = {"solver": solver, "runs": len({m.run_seed for m in ms}), "snapshots": len(ms)}
        for col in ("uav_count", "supported_fraction", "relocation", "objective", "lp_calls",
                    "wall_time_s"):
            row[f"mean_{col}"] = float(np.mean([getattr(m, col) for m in ms]))
        out.append(row)
    return out


def write_summary_csv(summary, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = list(summary[0]) if summary else ["solver"]
        w.writerow(cols)
        for row in summary:
            w.writerow([repr(v) if isinstance(v, float) else v for v in (row[c] for c in cols)])


def report(metrics, outdir, record_timing: bool = True) -> tuple[Path, Path]:
    """Write ``results.csv`` and ``summary.csv`` into ``outdir``."""
    metrics = list(metrics)
    if not metrics:
        raise ValueError("nothing to report")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    results = outdir / "results.csv"
    summary = outdir / "summary.csv"
    write_results_csv(metrics, results, record_timing)
    if not record_timing:
        metrics = [replace(m, wall_time_s=0.0) for m in metrics]
    write_summary_csv(summarize(metrics), summary)
    return results, summary
