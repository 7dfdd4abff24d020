"""Candidate UAV sites, the demand graph and the capacitated network graph.

Node numbering in a :class:`NetworkGraph`: cluster heads first (``0..M-1``),
then candidate sites (``M..M+S-1``). Sites are labelled ``U1..US`` and cluster
heads ``CH<id>`` in dumps.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .kernels import pairwise_distances
from .radio import (
    CoverageRadii,
    PropagationParams,
    a2a_path_loss,
    a2g_path_loss_array,
    snr_db,
)
from .scenario import Region, Snapshot

A2G_UP, A2G_DOWN, A2A = 0, 1, 2
KIND_NAMES = {A2G_UP: "A2G-up", A2G_DOWN: "A2G-down", A2A: "A2A"}


@dataclass(frozen=True, eq=False)
class CandidateGrid:
    sites: np.ndarray
    rows: int
    cols: int
    altitude: float = 2000.0

    def __len__(self):
        return self.sites.shape[0]


def build_grid(region: Region, rows: int, cols: int, altitude: float = 2000.0) -> CandidateGrid:
    """Evenly spaced lattice with half-cell margins, row-major from (low x, low y)."""
    if rows < 1 or cols < 1:
        raise ValueError("grid needs at least one row and one column")
    xs = (np.arange(cols) + 0.5) * region.width / cols
    ys = (np.arange(rows) + 0.5) * region.height / rows
    gx, gy = np.meshgrid(xs, ys)
    sites = np.column_stack([gx.ravel(), gy.ravel()])
    sites.setflags(write=False)
    return CandidateGrid(sites, rows, cols, altitude)


def parse_grid_shape(text: str) -> tuple[int, int]:
    """Parse ``"RxC"`` into ``(rows, cols)``."""
    try:
        r, c = text.lower().split("x")
        return int(r), int(c)
    except ValueError:
        raise ValueError(f"grid shape must look like 10x10, got {text!r}") from None


@dataclass(frozen=True)
class DemandGraph:
    ch_ids: tuple
    src: np.ndarray
    dst: np.ndarray
    demand: np.ndarray

    @property
    def n_commodities(self) -> int:
        return int(self.src.size)

    @property
    def total_demand(self) -> float:
        return float(self.demand.sum())

    def commodities(self):
        """``(src, dst, demand)`` triples using CH ids."""
        return [(self.ch_ids[i], self.ch_ids[j], float(d))
                for i, j, d in zip(self.src, self.dst, self.demand)]


def build_demand_graph(snapshot: Snapshot, ch_ids=None) -> DemandGraph:
    """One commodity per strictly positive off-diagonal TD entry (row-major)."""
    td = snapshot.td
    ch_ids = tuple(range(1, td.shape[0] + 1)) if ch_ids is None else tuple(ch_ids)
    mask = td > 0
    np.fill_diagonal(mask, False)
    src, dst = np.nonzero(mask)
    return DemandGraph(ch_ids, src.astype(np.int64), dst.astype(np.int64), td[src, dst].astype(float))


@dataclass(frozen=True)
class CapacityModel:
    mode: str = "constant"
    cap_a2g: float = 5.0
    cap_a2a: float = 5.0
    bandwidth_hz: float = 1.0e6

    def __post_init__(self):
        if self.mode not in ("constant", "shannon"):
            raise ValueError("capacity mode must be 'constant' or 'shannon'")
        if min(self.cap_a2g, self.cap_a2a, self.bandwidth_hz) <= 0:
            raise ValueError("capacities and bandwidth must be positive")


@dataclass(frozen=True, eq=False)
class NetworkGraph:
    n_ch: int
    n_sites: int
    ch_ids: tuple
    ch_positions: np.ndarray
    site_positions: np.ndarray
    tail: np.ndarray
    head: np.ndarray
    kind: np.ndarray
    capacity: np.ndarray
    distance: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.n_ch + self.n_sites

    @property
    def n_edges(self) -> int:
        return int(self.tail.size)

    def is_site(self, node) -> np.ndarray | bool:
        return np.asarray(node) >= self.n_ch

    def label(self, node: int) -> str:
        if node < self.n_ch:
            return f"CH{self.ch_ids[node]}"
        return f"U{node - self.n_ch + 1}"

    def site_node(self, site: int) -> int:
        return self.n_ch + site

    def edge_set(self) -> set:
        return set(zip(self.tail.tolist(), self.head.tolist()))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "v", "kind", "capacity_mbps", "distance_m"])
            for e in range(self.n_edges):
                w.writerow([self.label(int(self.tail[e])), self.label(int(self.head[e])),
                            KIND_NAMES[int(self.kind[e])], f"{self.capacity[e]:.6f}",
                            f"{self.distance[e]:.3f}"])


def _shannon_mbps(bandwidth_hz, snr):
    return bandwidth_hz * np.log2(1.0 + 10.0 ** (np.asarray(snr) / 10.0)) / 1e6


def build_network_graph(snapshot: Snapshot, grid: CandidateGrid, radii: CoverageRadii,
                        capmodel: CapacityModel | None = None,
                        params: PropagationParams | None = None,
                        ch_ids=None) -> NetworkGraph:
    """Directed links allowed by the coverage radii (thresholds inclusive).

    A2G links join a CH and a site whose horizontal distance is at most R1, in
    both directions; A2A links join two sites at most R2 apart. There are no
    CH-to-CH links.
    """
    if not (radii.r1_a2g > 0 and radii.r2_a2a > 0):
        raise ValueError("coverage radii must be positive")
    capmodel = capmodel or CapacityModel()
    params = params or PropagationParams()
    m = snapshot.m
    s = len(grid)
    ch_ids = tuple(range(1, m + 1)) if ch_ids is None else tuple(ch_ids)

    d_cs = pairwise_distances(snapshot.ch_positions, grid.sites)
    d_ss = pairwise_distances(grid.sites)
    ci, si = np.nonzero(d_cs <= radii.r1_a2g)
    ai, aj = np.nonzero(np.triu(d_ss <= radii.r2_a2a, k=1))

    n_g = ci.size
    n_a = ai.size
    tail = np.empty(2 * n_g + 2 * n_a, dtype=np.int64)
    head = np.empty_like(tail)
    kind = np.empty_like(tail)
    dist = np.empty(tail.size)
    # A2G pairs in (CH, site) order, up then down
    tail[0:2 * n_g:2], head[0:2 * n_g:2] = ci, m + si
    tail[1:2 * n_g:2], head[1:2 * n_g:2] = m + si, ci
    kind[0:2 * n_g:2], kind[1:2 * n_g:2] = A2G_UP, A2G_DOWN
    dist[0:2 * n_g:2] = dist[1:2 * n_g:2] = d_cs[ci, si]
    o = 2 * n_g
    tail[o::2], head[o::2] = m + ai, m + aj
    tail[o + 1::2], head[o + 1::2] = m + aj, m + ai
    kind[o:] = A2A
    dist[o::2] = dist[o + 1::2] = d_ss[ai, aj]

    if capmodel.mode == "constant":
        cap = np.where(kind == A2A, capmodel.cap_a2a, capmodel.cap_a2g).astype(float)
    else:
        loss = np.empty(tail.size)
        g = kind != A2A
        loss[g] = a2g_path_loss_array(params, dist[g])
        loss[~g] = [a2a_path_loss(params, d) for d in dist[~g]]
        p_tx = np.where(kind == A2G_UP, params.p_ue, params.p_uav)
        cap = _shannon_mbps(capmodel.bandwidth_hz, snr_db(params, p_tx, loss))
    if np.any(cap <= 0) or not np.all(np.isfinite(cap)):
        raise ValueError("link capacities must be positive and finite")

    return NetworkGraph(m, s, ch_ids, snapshot.ch_positions.copy(), np.asarray(grid.sites).copy(),
                        tail, head, kind, cap, dist)


def reach_sets(grid: CandidateGrid, reach_m: float) -> tuple:
    """Sites reachable from each site within ``reach_m`` (inclusive, self included)."""
    d = pairwise_distances(grid.sites)
    return tuple(np.flatnonzero(row <= reach_m) for row in d)


def horizontal_distance(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])
