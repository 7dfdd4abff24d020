"""Ground-network scenarios: clustered UEs, traffic draws and CH mobility.

Every generator is a pure function of its configuration and an integer seed.
Independent parts of a run draw from named substreams of the run seed so that
re-rolling one part (say, demand) leaves the others untouched.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .radio import PropagationParams

SCHEMA_VERSION = 1

_STREAMS = {"clusters": 1, "demand": 2, "mobility": 3}


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for one named part of a run."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), _STREAMS[name], *map(int, extra)]))


class ScenarioError(ValueError):
    pass


class MalformedScenarioError(ScenarioError):
    """The file is not parseable (truncated or not JSON)."""


class ScenarioSchemaError(ScenarioError):
    """The file parses but does not match the scenario schema."""


class UnsupportedVersionError(ScenarioError):
    """The file declares a schema version this build cannot read."""


class OrphanUeError(ScenarioError):
    """A demand references a UE that belongs to no cluster."""


# --- value types -----------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    width: float = 10_000.0
    height: float = 10_000.0

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("region dimensions must be positive")

    def contains(self, pts, tol: float = 1e-9) -> bool:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        return bool(np.all((pts >= -tol) & (pts <= np.array([self.width, self.height]) + tol)))


@dataclass(frozen=True, eq=False)
class Cluster:
    id: int
    ch: np.ndarray
    ues: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "ch", np.asarray(self.ch, dtype=float).reshape(2))
        object.__setattr__(self, "ues", np.asarray(self.ues, dtype=float).reshape(-1, 2))

    def __eq__(self, other):
        return (isinstance(other, Cluster) and self.id == other.id and self.radius == other.radius
                and np.array_equal(self.ch, other.ch) and np.array_equal(self.ues, other.ues))


@dataclass(frozen=True)
class TrafficGenConfig:
    flow_prob: float = 0.04
    demand_levels: tuple = (0.2, 0.4, 0.6)
    rng_seed: int = 0
    pair_mode: str = "ue"  # "ue" or "ch"

    def __post_init__(self):
        object.__setattr__(self, "demand_levels", tuple(float(v) for v in self.demand_levels))
        if not 0.0 <= self.flow_prob <= 1.0:
            raise ValueError("flow_prob must lie in [0, 1]")
        if not self.demand_levels or min(self.demand_levels) <= 0:
            raise ValueError("demand_levels must be non-empty and positive")
        if self.pair_mode not in ("ue", "ch"):
            raise ValueError("pair_mode must be 'ue' or 'ch'")


@dataclass(frozen=True)
class MobilityConfig:
    speed_min: float = 5.0
    speed_max: float = 40.0
    snapshot_duration: float = 25.0
    uav_vmax: float = 55.0
    num_snapshots: int = 20

    def __post_init__(self):
        # zero speeds are allowed so a run can model a static world
        if not (0.0 <= self.speed_min <= self.speed_max):
            raise ValueError("need 0 <= speed_min <= speed_max")
        if not self.snapshot_duration > 0:
            raise ValueError("snapshot_duration must be positive")
        if self.uav_vmax < 0:
            raise ValueError("uav_vmax must be non-negative")
        if self.num_snapshots < 1:
            raise ValueError("num_snapshots must be at least 1")

    @property
    def uav_reach(self) -> float:
        return self.uav_vmax * self.snapshot_duration


@dataclass(frozen=True)
class UeDemandMatrix:
    """Sparse UE-to-UE demand in Mbps keyed by global UE index pairs."""

    entries: dict
    n_ue: int

    def __post_init__(self):
        for (u, v), val in self.entries.items():
            if u == v:
                raise ValueError("self-pairs are not allowed")
            if val < 0:
                raise ValueError("negative demand")

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True, eq=False)
class Snapshot:
    t: int
    ch_positions: np.ndarray
    td: np.ndarray
    # random-waypoint state carried to the next step
    waypoints: np.ndarray | None = None
    speeds: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "ch_positions", np.asarray(self.ch_positions, dtype=float).reshape(-1, 2))
        td = np.array(self.td, dtype=float)
        m = self.ch_positions.shape[0]
        if td.shape != (m, m):
            raise ValueError(f"td must be {m}x{m}")
        if np.any(np.diag(td) != 0):
            raise ValueError("td diagonal must be zero")
        if np.any(td < 0):
            raise ValueError("td entries must be non-negative")
        object.__setattr__(self, "td", td)
        if self.waypoints is not None:
            object.__setattr__(self, "waypoints", np.asarray(self.waypoints, dtype=float).reshape(-1, 2))
            object.__setattr__(self, "speeds", np.asarray(self.speeds, dtype=float).reshape(-1))

    @property
    def m(self) -> int:
        return self.ch_positions.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Snapshot):
            return NotImplemented
        same_state = (self.waypoints is None) == (other.waypoints is None)
        if same_state and self.waypoints is not None:
            same_state = (np.array_equal(self.waypoints, other.waypoints)
                          and np.array_equal(self.speeds, other.speeds))
        return (self.t == other.t and same_state and np.array_equal(self.ch_positions, other.ch_positions)
                and np.array_equal(self.td, other.td))


# --- generation --------------------------------------------------------------------


def generate_clusters(region: Region, m: int, density_mean: float = 10.0,
                      radius: float = 1000.0, seed: int = 0) -> list[Cluster]:
    """Matern-style clusters with exactly ``m`` parents.

    Parents are uniform over the part of the region where the whole disc fits;
    each cluster gets ``max(1, Poisson(density_mean))`` UEs uniform in its disc
    and its CH sits at the parent point.
    """
    if m < 1:
        raise ValueError("need at least one cluster")
    if not radius < min(region.width, region.height) / 2:
        raise ValueError("region too small to place a cluster disc")
    rng = substream(seed, "clusters")
    parents = np.column_stack([
        rng.uniform(radius, region.width - radius, size=m),
        rng.uniform(radius, region.height - radius, size=m),
    ])
    counts = np.maximum(rng.poisson(density_mean, size=m), 1)
    clusters = []
    for i in range(m):
        rho = radius * np.sqrt(rng.uniform(0.0, 1.0, size=counts[i]))
        phi = rng.uniform(0.0, 2.0 * math.pi, size=counts[i])
        ues = parents[i] + np.column_stack([rho * np.cos(phi), rho * np.sin(phi)])
        clusters.append(Cluster(i + 1, parents[i], ues, float(radius)))
    return clusters


def ue_owner(clusters) -> np.ndarray:
    """Cluster position (0-based) of every global UE index."""
    return np.repeat(np.arange(len(clusters)), [len(c.ues) for c in clusters])


def generate_demand(clusters, cfg: TrafficGenConfig, seed: int | None = None) -> UeDemandMatrix:
    """Bernoulli flows between UEs of different clusters.

    ``seed`` overrides ``cfg.rng_seed``. In ``ch`` pair mode one flow decision
    is drawn per ordered cluster pair and attached to each cluster's first UE.
    """
    if len(clusters) < 2:
        raise ValueError("demand needs at least two clusters")
    seed = cfg.rng_seed if seed is None else seed
    rng = substream(seed, "demand")
    owner = ue_owner(clusters)
    if cfg.pair_mode == "ch":
        first = np.concatenate([[0], np.cumsum([len(c.ues) for c in clusters])[:-1]])
        ci, cj = np.meshgrid(np.arange(len(clusters)), np.arange(len(clusters)), indexing="ij")
        keep = ci != cj
        u, v = first[ci[keep]], first[cj[keep]]
    else:
        n = owner.size
        uu, vv = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        keep = owner[uu] != owner[vv]
        u, v = uu[keep], vv[keep]
    hit = rng.random(u.size) < cfg.flow_prob
    level = rng.integers(0, len(cfg.demand_levels), size=u.size)
    levels = np.asarray(cfg.demand_levels)
    entries = {(int(a), int(b)): float(levels[k]) for a, b, k, h in zip(u, v, level, hit) if h}
    return UeDemandMatrix(entries, int(owner.size))


def aggregate_td(clusters, d: UeDemandMatrix) -> np.ndarray:
    """Inter-cluster demand: sum of UE demands from cluster i to cluster j."""
    owner = ue_owner(clusters)
    m = len(clusters)
    td = np.zeros((m, m))
    if not d.entries:
        return td
    pairs = np.array(list(d.entries.keys()), dtype=np.int64)
    vals = np.array(list(d.entries.values()), dtype=float)
    if pairs.min() < 0 or pairs.max() >= owner.size:
        raise OrphanUeError("demand references a UE outside every cluster")
    np.add.at(td, (owner[pairs[:, 0]], owner[pairs[:, 1]]), vals)
    np.fill_diagonal(td, 0.0)
    return td


def _draw_leg(rng, region: Region, mobility: MobilityConfig):
    wp = np.array([rng.uniform(0.0, region.width), rng.uniform(0.0, region.height)])
    speed = rng.uniform(mobility.speed_min, mobility.speed_max)
    return wp, speed


def advance_snapshot(prev: Snapshot, mobility: MobilityConfig, region: Region, seed: int,
                     td: np.ndarray | None = None) -> Snapshot:
    """One random-waypoint step of length ``snapshot_duration`` for every CH.

    A CH moves straight toward its waypoint at its current speed and stops on
    the waypoint if it gets there within the step; arrival draws a fresh
    waypoint and speed for the next step. ``td`` replaces the demand matrix,
    otherwise it carries over.
    """
    rng = substream(seed, "mobility", prev.t)
    m = prev.m
    if prev.waypoints is None:
        legs = [_draw_leg(rng, region, mobility) for _ in range(m)]
        waypoints = np.array([w for w, _ in legs]).reshape(m, 2)
        speeds = np.array([s for _, s in legs], dtype=float)
    else:
        waypoints = prev.waypoints.copy()
        speeds = prev.speeds.copy()
    pos = prev.ch_positions.copy()
    for i in range(m):
        delta = waypoints[i] - pos[i]
        dist = math.hypot(delta[0], delta[1])
        reach = speeds[i] * mobility.snapshot_duration
        if reach >= dist:
            pos[i] = waypoints[i]
            waypoints[i], speeds[i] = _draw_leg(rng, region, mobility)
        else:
            pos[i] = pos[i] + delta * (reach / dist)
    return Snapshot(prev.t + 1, pos, prev.td if td is None else td, waypoints, speeds)


# --- whole scenarios ----------------------------------------------------------------


@dataclass(eq=False)
class Scenario:
    region: Region
    propagation: PropagationParams
    clusters: list
    traffic: TrafficGenConfig
    demand: UeDemandMatrix
    mobility: MobilityConfig
    snapshots: list = field(default_factory=list)
    seed: int = 0

    def ue_positions_at(self, t: int) -> list[np.ndarray]:
        """UE positions at snapshot ``t``: each group translates with its CH."""
        snap = self.snapshots[t]
        return [c.ues + (snap.ch_positions[i] - c.ch) for i, c in enumerate(self.clusters)]

    def to_dict(self) -> dict:
        return _to_dict(self)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def build_scenario(*, region: Region | None = None, m: int = 9, density_mean: float = 10.0,
                   radius: float = 1000.0, traffic: TrafficGenConfig | None = None,
                   mobility: MobilityConfig | None = None,
                   propagation: PropagationParams | None = None, seed: int = 0,
                   redraw_demand: bool = False) -> Scenario:
    """Generate clusters, demand and the full snapshot sequence from one seed."""
    region = region or Region()
    traffic = traffic or TrafficGenConfig(rng_seed=seed)
    mobility = mobility or MobilityConfig()
    propagation = propagation or PropagationParams()
    clusters = generate_clusters(region, m, density_mean, radius, seed)
    demand = generate_demand(clusters, traffic, seed)
    snap = Snapshot(0, np.array([c.ch for c in clusters]), aggregate_td(clusters, demand))
    snapshots = [snap]
    for t in range(1, mobility.num_snapshots):
        td = None
        if redraw_demand:
            td = aggregate_td(clusters, generate_demand(clusters, traffic, seed * 1_000_003 + t))
        snap = advance_snapshot(snap, mobility, region, seed, td)
        snapshots.append(snap)
    return Scenario(region, propagation, clusters, traffic, demand, mobility, snapshots, seed)


# --- serialization ----------------------------------------------------------------------


def _to_dict(s: Scenario) -> dict:
    def pt(p):
        return [float(p[0]), float(p[1])]

    return {
        "version": SCHEMA_VERSION,
        "seed": int(s.seed),
        "region": {"width": s.region.width, "height": s.region.height},
        "propagation": {k: getattr(s.propagation, k) for k in PropagationParams.__dataclass_fields__},
        "clusters": [
            {"id": c.id, "ch": pt(c.ch), "radius": c.radius, "ues": [pt(u) for u in c.ues]}
            for c in s.clusters
        ],
        "traffic": {
            "flow_prob": s.traffic.flow_prob,
            "demand_levels": list(s.traffic.demand_levels),
            "rng_seed": s.traffic.rng_seed,
            "pair_mode": s.traffic.pair_mode,
            "n_ue": s.demand.n_ue,
            "pairs": [[u, v, val] for (u, v), val in sorted(s.demand.entries.items())],
        },
        "mobility": {k: getattr(s.mobility, k) for k in MobilityConfig.__dataclass_fields__},
        "snapshots": [
            {
                "t": snap.t,
                "ch_positions": [pt(p) for p in snap.ch_positions],
                "td": snap.td.tolist(),
                "waypoints": None if snap.waypoints is None else [pt(p) for p in snap.waypoints],
                "speeds": None if snap.speeds is None else [float(v) for v in snap.speeds],
            }
            for snap in s.snapshots
        ],
    }


def scenario_from_dict(data) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioSchemaError("top level must be an object")
    if "version" not in data:
        raise ScenarioSchemaError("missing version")
    if data["version"] != SCHEMA_VERSION:
        raise UnsupportedVersionError(f"unsupported scenario version {data['version']!r}")
    try:
        region = Region(**data["region"])
        prop = PropagationParams(**data["propagation"])
        clusters = [Cluster(int(c["id"]), c["ch"], np.array(c["ues"], dtype=float).reshape(-1, 2),
                            float(c["radius"])) for c in data["clusters"]]
        tr = data["traffic"]
        traffic = TrafficGenConfig(tr["flow_prob"], tuple(tr["demand_levels"]), tr["rng_seed"],
                                   tr.get("pair_mode", "ue"))
        demand = UeDemandMatrix({(int(u), int(v)): float(val) for u, v, val in tr["pairs"]},
                                int(tr["n_ue"]))
        mobility = MobilityConfig(**data["mobility"])
        snaps = [Snapshot(int(s["t"]), s["ch_positions"], s["td"], s.get("waypoints"), s.get("speeds"))
                 for s in data["snapshots"]]
        seed = int(data.get("seed", 0))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioSchemaError(f"scenario does not match the schema: {exc}") from exc
    if len({c.id for c in clusters}) != len(clusters):
        raise ScenarioSchemaError("duplicate cluster ids")
    return Scenario(region, prop, clusters, traffic, demand, mobility, snaps, seed)


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario.to_dict(), fh, indent=1)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedScenarioError(f"{path}: not a valid scenario file ({exc})") from exc
    return scenario_from_dict(data)


def with_snapshots(scenario: Scenario, snapshots) -> Scenario:
    return replace(scenario, snapshots=list(snapshots))
