"""Joint placement-and-routing models over a network graph and a demand graph.

Column layout: one placement column per site, one flow column per
(edge, commodity), one unsupported-traffic column per commodity and, once
mobility is added, a single relocation indicator ``z``. Placement columns are
always continuous in ``[0, 1]`` here; integrality is the solvers' business.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .lpcore import EQ, GE, LE, LpModel
from .netgraph import DemandGraph, NetworkGraph


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    n_max: int
    phi: float = 0.1
    alpha: float = 0.05
    mobility_enabled: bool = False
    vmax_times_dt: float = 55.0 * 25.0

    def __post_init__(self):
        # n_max = 0 is accepted so the "no UAVs available" case can be posed
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError("phi must lie in [0, 1]")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.vmax_times_dt < 0:
            raise ValueError("vmax_times_dt must be non-negative")


@dataclass(frozen=True, eq=False)
class PrevPlacement:
    x_prev: np.ndarray
    reach_sets: tuple

    def __post_init__(self):
        x = np.asarray(self.x_prev)
        if not np.all((x == 0) | (x == 1)):
            raise ValueError("x_prev must be binary")
        object.__setattr__(self, "x_prev", x.astype(np.int8))
        if len(self.reach_sets) != x.size:
            raise ValueError("one reach set per site is required")
        for i, b in enumerate(self.reach_sets):
            if i not in set(np.asarray(b).tolist()):
                raise ValueError(f"reach set of site {i} must contain the site itself")

    @property
    def occupied(self) -> np.ndarray:
        return np.flatnonzero(self.x_prev)


@dataclass(frozen=True, eq=False)
class UprVariables:
    x_cols: np.ndarray
    f_cols: np.ndarray  # (n_edges, n_commodities)
    y_cols: np.ndarray
    z_col: int | None = None
    families: dict = field(default_factory=dict)  # row family -> (start, stop)

    @property
    def n_sites(self) -> int:
        return int(self.x_cols.size)

    @property
    def n_cols(self) -> int:
        return self.n_sites + int(self.f_cols.size) + int(self.y_cols.size) + (self.z_col is not None)


def expected_shape(net: NetworkGraph, dem: DemandGraph, prev: PrevPlacement | None = None):
    """Closed-form ``(n_cols, n_rows)`` of the model for these graphs."""
    k = dem.n_commodities
    site_tail = int(np.count_nonzero(net.tail >= net.n_ch))
    site_head = int(np.count_nonzero(net.head >= net.n_ch))
    cols = net.n_sites + net.n_edges * k + k
    rows = k * site_tail + k * site_head + 1 + k * net.n_nodes + net.n_edges
    if prev is not None:
        cols += 1
        rows += int(prev.occupied.size) + 2 * net.n_sites
    return cols, rows


def _objective_weights(net, dem, cfg):
    wx = cfg.phi / cfg.n_max if cfg.n_max > 0 else 0.0
    total = dem.total_demand
    wy = (1.0 - cfg.phi) / total if total > 0 else 0.0
    return wx, wy


def build_upr(net: NetworkGraph, dem: DemandGraph, cfg: SolveConfig):
    """Relaxed joint placement/routing model. Returns ``(LpModel, UprVariables)``."""
    if len(dem.ch_ids) != net.n_ch:
        raise ModelError("demand graph and network graph disagree on the cluster heads")
    if dem.n_commodities and (dem.src.max() >= net.n_ch or dem.dst.max() >= net.n_ch
                              or np.any(dem.src == dem.dst)):
        raise ModelError("commodity endpoints must be distinct cluster heads")
    if cfg.n_max > net.n_sites:
        raise ModelError(f"n_max={cfg.n_max} exceeds the {net.n_sites} candidate sites")

    S, E, K, M, N = net.n_sites, net.n_edges, dem.n_commodities, net.n_ch, net.n_nodes
    x_cols = np.arange(S)
    f_cols = S + np.arange(E * K).reshape(E, K)
    y_cols = S + E * K + np.arange(K)
    n_cols = S + E * K + K

    wx, wy = _objective_weights(net, dem, cfg)
    cost = np.zeros(n_cols)
    cost[x_cols] = wx
    cost[y_cols] = wy
    lower = np.zeros(n_cols)
    upper = np.full(n_cols, np.inf)
    upper[x_cols] = 1.0
    upper[y_cols] = dem.demand

    rows, cols, vals = [], [], []
    sense, rhs, families = [], [], {}
    r0 = 0
    cap = net.capacity

    # flow on a link only where its aerial end(s) carry a UAV
    for family, end in (("tail_gate", net.tail), ("head_gate", net.head)):
        edges = np.flatnonzero(end >= M)
        n = edges.size * K
        rr = r0 + np.arange(n)
        ee = np.repeat(edges, K)
        kk = np.tile(np.arange(K), edges.size)
        rows += [rr, rr]
        cols += [f_cols[ee, kk], x_cols[end[ee] - M]]
        vals += [np.ones(n), -cap[ee]]
        sense.append(np.full(n, LE))
        rhs.append(np.zeros(n))
        families[family] = (r0, r0 + n)
        r0 += n

    # UAV budget
    rows.append(np.full(S, r0))
    cols.append(x_cols)
    vals.append(np.ones(S))
    sense.append(np.array([LE]))
    rhs.append(np.array([float(cfg.n_max)]))
    families["budget"] = (r0, r0 + 1)
    r0 += 1

    # flow conservation per commodity and node; row r0 + k*N + u
    base = r0
    ek_e = np.repeat(np.arange(E), K)
    ek_k = np.tile(np.arange(K), E)
    fc = f_cols[ek_e, ek_k]
    rows += [base + ek_k * N + net.tail[ek_e], base + ek_k * N + net.head[ek_e]]
    cols += [fc, fc]
    vals += [np.ones(E * K), -np.ones(E * K)]
    kk = np.arange(K)
    rows += [base + kk * N + dem.src, base + kk * N + dem.dst]
    cols += [y_cols, y_cols]
    vals += [np.ones(K), -np.ones(K)]
    b10 = np.zeros(K * N)
    b10[kk * N + dem.src] = dem.demand
    b10[kk * N + dem.dst] = -dem.demand
    sense.append(np.full(K * N, EQ))
    rhs.append(b10)
    families["conservation"] = (r0, r0 + K * N)
    r0 += K * N

    # shared link capacity
    rows.append(r0 + ek_e)
    cols.append(fc)
    vals.append(np.ones(E * K))
    sense.append(np.full(E, LE))
    rhs.append(cap.astype(float))
    families["capacity"] = (r0, r0 + E)
    r0 += E

    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(r0, n_cols))
    names = _column_names(net, dem)
    row_names = _row_names(families, net, dem)
    model = LpModel(names, lower, upper, cost, A, np.concatenate(sense), np.concatenate(rhs),
                    row_names)
    return model, UprVariables(x_cols, f_cols, y_cols, None, families)


def _column_names(net, dem):
    sites = [f"x_U{s + 1}" for s in range(net.n_sites)]
    comm = [f"{dem.ch_ids[i]}_{dem.ch_ids[j]}" for i, j in zip(dem.src, dem.dst)]
    edges = [f"{net.label(int(u))}_{net.label(int(v))}" for u, v in zip(net.tail, net.head)]
    flows = [f"f_{c}__{e}" for e in edges for c in comm]
    return sites + flows + [f"y_{c}" for c in comm]


def _row_names(families, net, dem):
    out = []
    for fam, (a, b) in families.items():
        out += [f"{fam}_{i}" for i in range(b - a)]
    return tuple(out)


def add_mobility(model: LpModel, vars: UprVariables, prev: PrevPlacement, cfg: SolveConfig):
    """Append reachability rows, the relocation indicator ``z`` and its rows.

    For each previously occupied site ``i``: ``sum(x[j] for j in reach[i]) >= 1``.
    For every site: ``|x[u] - x_prev[u]| <= z`` as two linear rows.
    """
    S = vars.n_sites
    if prev.x_prev.size != S:
        raise ModelError("previous placement and model disagree on the site count")
    if vars.z_col is not None:
        raise ModelError("mobility rows already present")
    n0, m0 = model.n_vars, model.n_rows
    z = n0
    occupied = prev.occupied
    rows, cols, vals = [], [], []
    for r, i in enumerate(occupied):
        b = np.asarray(prev.reach_sets[i], dtype=np.int64)
        if b.size and (b.min() < 0 or b.max() >= S):
            raise ModelError("reach set refers to an unknown site")
        rows.append(np.full(b.size, r))
        cols.append(vars.x_cols[b])
        vals.append(np.ones(b.size))
    n15 = occupied.size
    base = n15
    uu = np.arange(S)
    rows += [base + uu, base + uu, base + S + uu, base + S + uu]
    cols += [vars.x_cols, np.full(S, z), vars.x_cols, np.full(S, z)]
    vals += [np.ones(S), -np.ones(S), -np.ones(S), -np.ones(S)]
    xp = prev.x_prev.astype(float)
    new = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n15 + 2 * S, n0 + 1))
    A = sp.vstack([sp.hstack([model.A, sp.csr_matrix((m0, 1))]), new]).tocsr()
    sense = np.concatenate([model.sense, np.full(n15, GE), np.full(2 * S, LE)])
    rhs = np.concatenate([model.rhs, np.ones(n15), xp, -xp])
    families = dict(vars.families)
    families["reach"] = (m0, m0 + n15)
    families["move_up"] = (m0 + base, m0 + base + S)
    families["move_down"] = (m0 + base + S, m0 + base + 2 * S)
    row_names = tuple(model.row_names) + tuple(f"reach_{i}" for i in occupied) + tuple(
        f"move_up_{u}" for u in range(S)) + tuple(f"move_down_{u}" for u in range(S))
    out = LpModel(model.names + ("z",), np.append(model.lower, 0.0), np.append(model.upper, np.inf),
                  np.append(model.cost, cfg.alpha), A, sense, rhs, row_names, model.obj_offset)
    return out, replace(vars, z_col=z, families=families)


def build_reduced(model: LpModel, vars: UprVariables, fixed) -> LpModel:
    """Pin the placement columns of sites in ``fixed`` to one."""
    fixed = np.asarray(sorted(set(int(u) for u in fixed)), dtype=np.int64)
    if fixed.size and (fixed.min() < 0 or fixed.max() >= vars.n_sites):
        raise ModelError("fixed set refers to an unknown site")
    if fixed.size == 0:
        return model
    return model.with_bounds(vars.x_cols[fixed], lower=1.0)


def build_model(net: NetworkGraph, dem: DemandGraph, cfg: SolveConfig,
                prev: PrevPlacement | None = None):
    """Full relaxed model, with mobility rows when ``cfg.mobility_enabled``."""
    model, vars = build_upr(net, dem, cfg)
    if cfg.mobility_enabled:
        if prev is None:
            raise ModelError("mobility is enabled but no previous placement was given")
        model, vars = add_mobility(model, vars, prev, cfg)
    return model, vars


def model_stats(model: LpModel) -> dict:
    return {"rows": model.n_rows, "cols": model.n_vars, "nonzeros": model.nnz}
