"""Reference computations that share no code with the package's model or solver.

The flow LP for a fixed placement is assembled here from the raw graph arrays
and solved with HiGHS through scipy; the exact optimum is found by trying every
binary placement.
"""
import itertools
import math

import numpy as np
from scipy.optimize import linprog


def flow_lp_for_placement(net, dem, x, phi, n_max, alpha=0.0, x_prev=None, reach=None):
    """Objective of the best routing for the binary placement ``x``.

    Returns ``(objective, unsupported)``; ``objective`` is ``inf`` when the
    placement breaks the UAV budget or a reach requirement.
    """
    x = np.asarray(x, dtype=int)
    if x.sum() > n_max:
        return math.inf, None
    z = 0.0
    if x_prev is not None:
        for i in np.flatnonzero(x_prev):
            if x[list(reach[i])].sum() < 1:
                return math.inf, None
        z = float(np.max(np.abs(x - np.asarray(x_prev)), initial=0.0))
    total = float(np.sum(dem.demand))
    wx = phi / n_max if n_max > 0 else 0.0
    wy = (1.0 - phi) / total if total > 0 else 0.0
    K = len(dem.demand)
    if K == 0:
        return wx * x.sum() + alpha * z, np.zeros(0)

    M = net.n_ch
    alive = [e for e in range(net.n_edges)
             if all(node < M or x[node - M] == 1 for node in (net.tail[e], net.head[e]))]
    E = len(alive)
    nv = E * K + K
    c = np.zeros(nv)
    c[E * K:] = wy
    n_nodes = net.n_ch + net.n_sites
    A_eq = np.zeros((K * n_nodes, nv))
    b_eq = np.zeros(K * n_nodes)
    for k in range(K):
        for i, e in enumerate(alive):
            A_eq[k * n_nodes + net.tail[e], i * K + k] += 1.0
            A_eq[k * n_nodes + net.head[e], i * K + k] -= 1.0
        s, d = dem.src[k], dem.dst[k]
        # out - in = TD - y at the source, -(TD - y) at the sink
        A_eq[k * n_nodes + s, E * K + k] += 1.0
        A_eq[k * n_nodes + d, E * K + k] -= 1.0
        b_eq[k * n_nodes + s] += dem.demand[k]
        b_eq[k * n_nodes + d] -= dem.demand[k]
    A_ub = np.zeros((E, nv))
    for i, e in enumerate(alive):
        A_ub[i, i * K:(i + 1) * K] = 1.0
    b_ub = np.array([net.capacity[e] for e in alive])
    bounds = [(0, None)] * (E * K) + [(0, float(d)) for d in dem.demand]
    res = linprog(c, A_ub=A_ub if E else None, b_ub=b_ub if E else None, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    assert res.status == 0, res.message
    y = res.x[E * K:]
    return wx * x.sum() + wy * y.sum() + alpha * z, y


def enumerate_optimum(net, dem, phi, n_max, alpha=0.0, x_prev=None, reach=None):
    """Exhaustive minimum over all placements. Returns ``(objective, x, y)``."""
    best = (math.inf, None, None)
    for bits in itertools.product((0, 1), repeat=net.n_sites):
        x = np.array(bits)
        obj, y = flow_lp_for_placement(net, dem, x, phi, n_max, alpha, x_prev, reach)
        if obj < best[0] - 1e-12:
            best = (obj, x, y)
    return best


def vertex_enumeration(A, b, c):
    """Minimize ``c @ x`` over ``{A x <= b}`` by visiting every vertex.

    Only for tiny bounded polytopes. Returns ``inf`` when empty.
    """
    m, n = A.shape
    best = math.inf
    for rows in itertools.combinations(range(m), n):
        sub = A[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        v = np.linalg.solve(sub, b[list(rows)])
        if np.all(A @ v <= b + 1e-9):
            best = min(best, float(c @ v))
    return best
