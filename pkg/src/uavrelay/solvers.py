"""Exact branch-and-bound and LP-rounding placement solvers, plus an audit.

Both solvers return a :class:`PlacementDecision`. :func:`verify_decision`
re-checks a decision against the graphs directly, without going through the
LP model, so it can catch modelling mistakes as well as solver ones.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .lpcore import solve_lp
from .netgraph import DemandGraph, NetworkGraph
from .uprmodel import (
    PrevPlacement,
    SolveConfig,
    UprVariables,
    build_model,
    build_reduced,
)

INT_TOL = 1e-6
AUDIT_TOL = 1e-6


@dataclass(eq=False)
class PlacementDecision:
    """Binary placement with its routing.

    Attributes
    ----------
    x : ndarray of int8, shape (S,)
    flows : ndarray, shape (E, K)
        Mbps of each commodity on each directed link.
    unsupported : ndarray, shape (K,)
    z_value : float or None
        ``max |x - x_prev|`` when a previous placement was supplied.
    status : str
        ``optimal``, ``infeasible`` or ``node_limit`` for the exact solver;
        ``complete``, ``stopped_infeasible`` or ``infeasible`` for the heuristic.
    """

    x: np.ndarray
    flows: np.ndarray
    unsupported: np.ndarray
    z_value: float | None
    objective: float
    solver: str
    lp_calls: int
    wall_time: float
    status: str
    nodes: int = 0
    lp_objectives: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status not in ("infeasible",)

    @property
    def uav_count(self) -> int:
        return int(self.x.sum())

    def supported_fraction(self, dem: DemandGraph) -> float:
        total = dem.total_demand
        if total <= 0:
            return 1.0
        return float(np.clip((total - self.unsupported.sum()) / total, 0.0, 1.0))

    def to_dict(self, net: NetworkGraph, dem: DemandGraph) -> dict:
        comm = []
        for k, (i, j, d) in enumerate(zip(dem.src, dem.dst, dem.demand)):
            comm.append({"src": net.label(int(i)), "dst": net.label(int(j)), "demand": float(d),
                         "supported": float(d - self.unsupported[k]),
                         "unsupported": float(self.unsupported[k])})
        flows = []
        for e, k in zip(*np.nonzero(self.flows > 1e-6)):
            flows.append({"u": net.label(int(net.tail[e])), "v": net.label(int(net.head[e])),
                          "commodity": int(k), "mbps": float(self.flows[e, k])})
        return {
            "solver": self.solver,
            "status": self.status,
            "sites": [f"U{u + 1}" for u in np.flatnonzero(self.x)],
            "objective": float(self.objective),
            "z_value": None if self.z_value is None else float(self.z_value),
            "lp_calls": self.lp_calls,
            "nodes": self.nodes,
            "wall_time": float(self.wall_time),
            "commodities": comm,
            "flows": flows,
        }

    def to_json(self, net: NetworkGraph, dem: DemandGraph) -> str:
        return json.dumps(self.to_dict(net, dem), indent=2)


class _Instance:
    """Model plus the bookkeeping both solvers share."""

    def __init__(self, net, dem, cfg, prev):
        self.net, self.dem, self.cfg = net, dem, cfg
        self.prev = prev if cfg.mobility_enabled else None
        self.model, self.vars = build_model(net, dem, cfg, self.prev)
        v: UprVariables = self.vars
        self.wx = float(self.model.cost[v.x_cols[0]]) if v.n_sites else 0.0
        self.wy = float(self.model.cost[v.y_cols[0]]) if v.y_cols.size else 0.0

    def objective(self, x, y):
        obj = self.wx * float(x.sum()) + self.wy * float(y.sum())
        z = self.z_of(x)
        if z is not None:
            obj += self.cfg.alpha * z
        return obj

    def solve(self, model):
        return solve_lp(model)

    def z_of(self, x):
        if self.prev is None:
            return None
        return float(np.max(np.abs(x - self.prev.x_prev), initial=0.0))

    def decision(self, x, sol_x, solver, lp_calls, t0, status, **kw):
        v = self.vars
        x = np.asarray(x, dtype=np.int8)
        flows = np.maximum(sol_x[v.f_cols], 0.0) if v.f_cols.size else np.zeros(v.f_cols.shape)
        y = np.clip(sol_x[v.y_cols], 0.0, self.dem.demand)
        return PlacementDecision(x, flows, y, self.z_of(x), self.objective(x, y), solver,
                                 lp_calls, time.perf_counter() - t0, status, **kw)

    def empty(self, solver, lp_calls, t0, status="infeasible"):
        v = self.vars
        return PlacementDecision(np.zeros(v.n_sites, dtype=np.int8), np.zeros(v.f_cols.shape),
                                 self.dem.demand.copy(), None, math.inf, solver, lp_calls,
                                 time.perf_counter() - t0, status)


def solve_milp(net: NetworkGraph, dem: DemandGraph, cfg: SolveConfig,
               prev: PrevPlacement | None = None, *, node_limit: int = 1_000_000,
               tol: float = 1e-9) -> PlacementDecision:
    """Exact placement by depth-first branch and bound on the placement columns.

    Branches on the most fractional site (ties to the lowest index), explores
    the ``x = 1`` child first and prunes any node whose relaxation is not
    better than the incumbent by more than ``tol``.
    """
    t0 = time.perf_counter()
    inst = _Instance(net, dem, cfg, prev)
    xc = inst.vars.x_cols
    base_lo = inst.model.lower[xc]
    base_hi = inst.model.upper[xc]
    best_obj, best = math.inf, None
    lp_calls = nodes = 0
    # a node is a vector of forced site values, -1 where the site is free
    stack = [np.full(xc.size, -1, dtype=np.int8)]
    while stack:
        if nodes >= node_limit:
            status = "node_limit"
            break
        fixing = stack.pop()
        nodes += 1
        lo, hi = base_lo.copy(), base_hi.copy()
        lo[fixing == 1] = 1.0
        hi[fixing == 0] = 0.0
        sol = inst.solve(inst.model.with_bounds(xc, lo, hi))
        lp_calls += 1
        if not sol.optimal or sol.objective >= best_obj - tol:
            continue
        xv = sol.x[xc]
        frac = np.abs(xv - np.round(xv))
        if frac.max(initial=0.0) <= INT_TOL:
            x = np.round(xv).astype(np.int8)
            dec = inst.decision(x, sol.x, "milp", 0, t0, "optimal")
            if dec.objective < best_obj:
                best_obj, best = dec.objective, dec
            continue
        score = np.where(frac > INT_TOL, np.abs(xv - 0.5), np.inf)
        u = int(np.argmin(score))
        down, up = fixing.copy(), fixing.copy()
        down[u], up[u] = 0, 1
        stack += [down, up]
    else:
        status = "optimal"
    if best is None:
        dec = inst.empty("milp", lp_calls, t0, "infeasible" if status == "optimal" else status)
        dec.nodes = nodes
        return dec
    best.status = status
    best.lp_calls = lp_calls
    best.nodes = nodes
    best.wall_time = time.perf_counter() - t0
    return best


def _argmax_lowest(values, candidates):
    """Candidate with the largest value; ``np.argmax`` already prefers the first."""
    candidates = np.asarray(candidates)
    return int(candidates[np.argmax(values[candidates])])


def solve_dmlp(net: NetworkGraph, dem: DemandGraph, cfg: SolveConfig,
               prev: PrevPlacement | None = None) -> PlacementDecision:
    """Greedy LP rounding: fix one site per LP solve until nothing is gained.

    Sites that keep a previously occupied site's reach set covered get priority.
    At most ``n_max + 1`` LPs are solved.
    """
    t0 = time.perf_counter()
    inst = _Instance(net, dem, cfg, prev)
    v = inst.vars
    S = v.n_sites
    fixed: list[int] = []
    last = None
    lp_calls = 0
    status = "complete"
    objs = []
    occupied = inst.prev.occupied if inst.prev is not None else np.empty(0, dtype=np.int64)
    while True:
        sol = inst.solve(build_reduced(inst.model, v, fixed))
        lp_calls += 1
        if not sol.optimal:
            if last is None:
                return inst.empty("dmlp", lp_calls, t0)
            # the candidate just fixed broke feasibility: drop it and stop
            fixed.pop()
            status = "stopped_infeasible"
            break
        last = sol
        objs.append(sol.objective)
        if len(fixed) >= cfg.n_max:
            break
        in_x = np.zeros(S, dtype=bool)
        in_x[fixed] = True
        if in_x.all():
            break
        xv = sol.x[v.x_cols]
        pending = []
        for site in occupied:
            reach = np.asarray(inst.prev.reach_sets[site])
            if not in_x[reach].any():
                pending.append(_argmax_lowest(xv, reach))
        if pending:
            u = _argmax_lowest(xv, sorted(set(pending)))
        else:
            u = _argmax_lowest(xv, np.flatnonzero(~in_x))
        if xv[u] <= INT_TOL:
            break
        fixed.append(u)
    x = np.zeros(S, dtype=np.int8)
    x[fixed] = 1
    return inst.decision(x, last.x, "dmlp", lp_calls, t0, status, lp_objectives=objs)


def solve_relaxation(net: NetworkGraph, dem: DemandGraph, cfg: SolveConfig,
                     prev: PrevPlacement | None = None) -> float:
    """Optimum of the continuous relaxation (``inf`` if infeasible)."""
    inst = _Instance(net, dem, cfg, prev)
    sol = inst.solve(inst.model)
    return sol.objective if sol.optimal else math.inf


def solve_fixed_placement(net: NetworkGraph, dem: DemandGraph, cfg: SolveConfig, x,
                          prev: PrevPlacement | None = None, solver: str = "static"):
    """Best routing for a given binary placement."""
    t0 = time.perf_counter()
    inst = _Instance(net, dem, cfg, prev)
    x = np.asarray(x, dtype=np.int8)
    xc = inst.vars.x_cols
    sol = inst.solve(inst.model.with_bounds(xc, x.astype(float), x.astype(float)))
    if not sol.optimal:
        return inst.empty(solver, 1, t0)
    return inst.decision(x, sol.x, solver, 1, t0, "optimal")


# --- audit ----------------------------------------------------------------------


def verify_decision(decision: PlacementDecision, net: NetworkGraph, dem: DemandGraph,
                    cfg: SolveConfig, prev: PrevPlacement | None = None) -> dict:
    """Largest violation of each constraint family, computed from graph data.

    Keys: ``binary``, ``tail_gate``, ``head_gate``, ``budget``, ``conservation``,
    ``capacity``, ``flow_sign``, ``unsupported_range`` and, when mobility is
    enabled, ``reach``, ``move_up``, ``move_down``.
    """
    x = np.asarray(decision.x, dtype=float)
    f = np.asarray(decision.flows, dtype=float)
    y = np.asarray(decision.unsupported, dtype=float)
    M, K = net.n_ch, dem.n_commodities
    out = {}
    out["binary"] = float(np.max(np.minimum(np.abs(x), np.abs(x - 1.0)), initial=0.0))

    for name, end in (("tail_gate", net.tail), ("head_gate", net.head)):
        e = np.flatnonzero(end >= M)
        lim = (x[end[e] - M] * net.capacity[e])[:, None]
        out[name] = float(np.max(f[e] - lim, initial=0.0))
    out["budget"] = max(0.0, float(x.sum()) - cfg.n_max)

    worst = 0.0
    for k in range(K):
        bal = np.zeros(net.n_nodes)
        np.add.at(bal, net.tail, f[:, k])
        np.add.at(bal, net.head, -f[:, k])
        served = dem.demand[k] - y[k]
        bal[dem.src[k]] -= served
        bal[dem.dst[k]] += served
        worst = max(worst, float(np.abs(bal).max(initial=0.0)))
    out["conservation"] = worst
    out["capacity"] = float(np.max(f.sum(axis=1) - net.capacity, initial=0.0)) if K else 0.0
    out["flow_sign"] = float(np.max(-f, initial=0.0))
    out["unsupported_range"] = float(max(np.max(-y, initial=0.0),
                                         np.max(y - dem.demand, initial=0.0)))

    if cfg.mobility_enabled and prev is not None:
        reach = 0.0
        for i in prev.occupied:
            reach = max(reach, 1.0 - float(x[np.asarray(prev.reach_sets[i])].sum()))
        out["reach"] = reach
        z = decision.z_value if decision.z_value is not None else 0.0
        d = x - prev.x_prev
        out["move_up"] = float(np.max(d - z, initial=0.0))
        out["move_down"] = float(np.max(-d - z, initial=0.0))
    return {k: max(0.0, v) for k, v in out.items()}


def audit_ok(report: dict, tol: float = AUDIT_TOL) -> bool:
    return all(v <= tol for v in report.values())
