"""Hot inner loops: simplex pricing, ratio test, eta-file updates, distances.

Each kernel has a numba implementation (``*_nb``) and a vectorized numpy
implementation (``*_np``) with identical semantics. The public names are bound
to one of the two according to :mod:`uavrelay._accel`.

Variable status codes used by the simplex::

    0 basic, 1 nonbasic at lower, 2 nonbasic at upper, 3 nonbasic free, 4 fixed
"""
import numpy as np

from ._accel import USE_NUMBA, njit

BASIC, AT_LOWER, AT_UPPER, FREE, FIXED = 0, 1, 2, 3, 4


# --- pricing -----------------------------------------------------------------


@njit
def select_entering_nb(d, status, tol, bland):
    best = -1
    best_dir = 0
    best_score = 0.0
    for j in range(d.shape[0]):
        s = status[j]
        dj = d[j]
        direction = 0
        if (s == AT_LOWER or s == FREE) and dj < -tol:
            direction = 1
        elif (s == AT_UPPER or s == FREE) and dj > tol:
            direction = -1
        if direction == 0:
            continue
        if bland:
            return j, direction
        score = abs(dj)
        if score > best_score:
            best_score = score
            best = j
            best_dir = direction
    return best, best_dir


def select_entering_np(d, status, tol, bland):
    up = ((status == AT_LOWER) | (status == FREE)) & (d < -tol)
    down = ((status == AT_UPPER) | (status == FREE)) & (d > tol)
    # a free column with d < -tol is an "up" candidate only
    down &= ~up
    cand = up | down
    if not cand.any():
        return -1, 0
    if bland:
        j = int(np.flatnonzero(cand)[0])
    else:
        score = np.where(cand, np.abs(d), -1.0)
        j = int(np.argmax(score))
    return j, (1 if up[j] else -1)


# --- ratio test ---------------------------------------------------------------


@njit
def ratio_test_nb(xb, lb, ub, alpha, direction, basis, tol, pivot_tol, bland):
    """Bounded ratio test; Harris two-pass unless ``bland``.

    Returns ``(row, step, to_upper)``; ``row == -1`` when no basic variable
    blocks the move.
    """
    m = xb.shape[0]
    inf = np.inf
    theta_max = inf
    for i in range(m):
        g = direction * alpha[i]
        if g > pivot_tol and lb[i] > -inf:
            t = (xb[i] - lb[i] + tol) / g
            if t < theta_max:
                theta_max = t
        elif g < -pivot_tol and ub[i] < inf:
            t = (ub[i] - xb[i] + tol) / (-g)
            if t < theta_max:
                theta_max = t
    if theta_max == inf:
        return -1, inf, False

    row = -1
    step = inf
    to_upper = False
    if bland:
        # exact minimum ratio, ties to the lowest variable index
        best = inf
        for i in range(m):
            g = direction * alpha[i]
            t = inf
            if g > pivot_tol and lb[i] > -inf:
                t = (xb[i] - lb[i]) / g
            elif g < -pivot_tol and ub[i] < inf:
                t = (ub[i] - xb[i]) / (-g)
            if t < 0.0:
                t = 0.0
            if t < best - 1e-12 or (abs(t - best) <= 1e-12 and row >= 0 and basis[i] < basis[row]):
                best = t
                row = i
                to_upper = g < 0.0
        return row, best, to_upper

    best_piv = 0.0
    for i in range(m):
        g = direction * alpha[i]
        t = inf
        if g > pivot_tol and lb[i] > -inf:
            t = (xb[i] - lb[i]) / g
        elif g < -pivot_tol and ub[i] < inf:
            t = (ub[i] - xb[i]) / (-g)
        if t <= theta_max and abs(g) > best_piv:
            best_piv = abs(g)
            row = i
            step = t
            to_upper = g < 0.0
    if step < 0.0:
        step = 0.0
    return row, step, to_upper


def ratio_test_np(xb, lb, ub, alpha, direction, basis, tol, pivot_tol, bland):
    g = direction * alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        dec = (g > pivot_tol) & np.isfinite(lb)
        inc = (g < -pivot_tol) & np.isfinite(ub) & ~dec
        exact = np.full(g.shape, np.inf)
        exact[dec] = (xb[dec] - lb[dec]) / g[dec]
        exact[inc] = (ub[inc] - xb[inc]) / (-g[inc])
        relaxed = np.full(g.shape, np.inf)
        relaxed[dec] = (xb[dec] - lb[dec] + tol) / g[dec]
        relaxed[inc] = (ub[inc] - xb[inc] + tol) / (-g[inc])
    theta_max = relaxed.min() if relaxed.size else np.inf
    if not np.isfinite(theta_max):
        return -1, np.inf, False
    if bland:
        exact = np.maximum(exact, 0.0)
        best = exact.min()
        ties = np.flatnonzero(exact <= best + 1e-12)
        # mirror the sequential tie rule of the compiled kernel
        row = int(ties[0])
        best_t = exact[row]
        for i in ties[1:]:
            if abs(exact[i] - best_t) <= 1e-12 and basis[i] < basis[row]:
                row = int(i)
            elif exact[i] < best_t - 1e-12:
                row, best_t = int(i), exact[i]
        return row, float(exact[row]), bool(g[row] < 0.0)
    ok = exact <= theta_max
    piv = np.where(ok, np.abs(g), 0.0)
    row = int(np.argmax(piv))
    if piv[row] <= 0.0:
        return -1, np.inf, False
    return row, float(max(exact[row], 0.0)), bool(g[row] < 0.0)


# --- product-form eta file ----------------------------------------------------
#
# Eta k replaces basis position ``r[k]`` by a column whose basis representation
# has pivot ``piv[k]`` and off-pivot nonzeros ``idx/val[ptr[k]:ptr[k+1]]``.


@njit
def ftran_etas_nb(v, eta_r, eta_piv, eta_ptr, eta_idx, eta_val, count):
    for k in range(count):
        r = eta_r[k]
        vr = v[r] / eta_piv[k]
        if vr != 0.0:
            for p in range(eta_ptr[k], eta_ptr[k + 1]):
                v[eta_idx[p]] -= eta_val[p] * vr
        v[r] = vr
    return v


def ftran_etas_np(v, eta_r, eta_piv, eta_ptr, eta_idx, eta_val, count):
    for k in range(count):
        r = eta_r[k]
        vr = v[r] / eta_piv[k]
        if vr != 0.0:
            s, e = eta_ptr[k], eta_ptr[k + 1]
            v[eta_idx[s:e]] -= eta_val[s:e] * vr
        v[r] = vr
    return v


@njit
def btran_etas_nb(w, eta_r, eta_piv, eta_ptr, eta_idx, eta_val, count):
    for k in range(count - 1, -1, -1):
        r = eta_r[k]
        acc = 0.0
        for p in range(eta_ptr[k], eta_ptr[k + 1]):
            acc += w[eta_idx[p]] * eta_val[p]
        w[r] = (w[r] - acc) / eta_piv[k]
    return w


def btran_etas_np(w, eta_r, eta_piv, eta_ptr, eta_idx, eta_val, count):
    for k in range(count - 1, -1, -1):
        r = eta_r[k]
        s, e = eta_ptr[k], eta_ptr[k + 1]
        acc = float(w[eta_idx[s:e]] @ eta_val[s:e])
        w[r] = (w[r] - acc) / eta_piv[k]
    return w


# --- geometry -----------------------------------------------------------------


@njit
def pairwise_distances_nb(a, b):
    n = a.shape[0]
    m = b.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            out[i, j] = np.sqrt(dx * dx + dy * dy)
    return out


def pairwise_distances_np(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


if USE_NUMBA:
    select_entering = select_entering_nb
    ratio_test = ratio_test_nb
    ftran_etas = ftran_etas_nb
    btran_etas = btran_etas_nb
    _pairwise = pairwise_distances_nb
else:
    select_entering = select_entering_np
    ratio_test = ratio_test_np
    ftran_etas = ftran_etas_np
    btran_etas = btran_etas_np
    _pairwise = pairwise_distances_np


def pairwise_distances(a, b=None) -> np.ndarray:
    """Euclidean distances between rows of two ``(n, 2)`` point arrays."""
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 2)
    b = a if b is None else np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 2)
    return _pairwise(a, b)
