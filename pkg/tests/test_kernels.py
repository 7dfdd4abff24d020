"""The compiled and numpy kernels must agree, and so must whole solves on each backend."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from uavrelay import kernels
from uavrelay._accel import HAVE_NUMBA, backend_name
from uavrelay.kernels import AT_LOWER, AT_UPPER, BASIC, FIXED, FREE

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def random_pricing(rng, n):
    d = rng.normal(size=n) * (rng.random(n) < 0.7)
    status = rng.choice([BASIC, AT_LOWER, AT_UPPER, FREE, FIXED], size=n).astype(np.int8)
    return d, status


@needs_numba
@pytest.mark.parametrize("bland", [False, True])
def test_select_entering_agrees(bland):
    rng = np.random.default_rng(0)
    for _ in range(300):
        d, status = random_pricing(rng, int(rng.integers(1, 60)))
        a = kernels.select_entering_nb(d, status, 1e-9, bland)
        b = kernels.select_entering_np(d, status, 1e-9, bland)
        assert tuple(int(v) for v in a) == b


@needs_numba
@pytest.mark.parametrize("bland", [False, True])
def test_ratio_test_agrees(bland):
    rng = np.random.default_rng(1)
    for _ in range(300):
        m = int(rng.integers(1, 40))
        lb = np.where(rng.random(m) < 0.2, -np.inf, rng.uniform(-2, 0, m))
        ub = np.where(rng.random(m) < 0.3, np.inf, rng.uniform(0, 2, m))
        xb = np.clip(rng.uniform(-1, 1, m), lb, ub)
        # some degenerate rows sitting on a bound
        on = rng.random(m) < 0.2
        xb[on] = np.where(np.isfinite(lb[on]), lb[on], xb[on])
        alpha = rng.normal(size=m) * (rng.random(m) < 0.6)
        basis = rng.permutation(3 * m)[:m]
        direction = int(rng.choice([-1, 1]))
        a = kernels.ratio_test_nb(xb, lb, ub, alpha, direction, basis, 1e-9, 1e-9, bland)
        b = kernels.ratio_test_np(xb, lb, ub, alpha, direction, basis, 1e-9, 1e-9, bland)
        assert a[0] == b[0]
        if a[0] >= 0:
            assert a[1] == pytest.approx(b[1], rel=1e-12, abs=1e-15) and a[2] == b[2]


def random_etas(rng, m, count):
    r = rng.integers(0, m, count)
    piv = rng.uniform(0.5, 2.0, count) * rng.choice([-1, 1], count)
    ptr = [0]
    idx, val = [], []
    for k in range(count):
        others = np.setdiff1d(rng.choice(m, size=min(m, 4), replace=False), [r[k]])
        idx += others.tolist()
        val += rng.normal(size=others.size).tolist()
        ptr.append(len(idx))
    return (r.astype(np.int64), piv, np.array(ptr, dtype=np.int64),
            np.array(idx, dtype=np.int64), np.array(val))


def dense_etas(m, r, piv, ptr, idx, val):
    mats = []
    for k in range(len(r)):
        E = np.eye(m)
        E[r[k], r[k]] = piv[k]
        E[idx[ptr[k]:ptr[k + 1]], r[k]] = val[ptr[k]:ptr[k + 1]]
        mats.append(E)
    return mats


@pytest.mark.parametrize("impl", ["nb", "np"])
def test_eta_file_matches_dense_inverse(impl):
    if impl == "nb" and not HAVE_NUMBA:
        pytest.skip("numba not installed")
    ftran = getattr(kernels, f"ftran_etas_{impl}")
    btran = getattr(kernels, f"btran_etas_{impl}")
    rng = np.random.default_rng(2)
    for _ in range(50):
        m, count = int(rng.integers(2, 12)), int(rng.integers(1, 6))
        etas = random_etas(rng, m, count)
        B = np.eye(m)
        for E in dense_etas(m, *etas):
            B = B @ E
        v = rng.normal(size=m)
        np.testing.assert_allclose(ftran(v.copy(), *etas, count), np.linalg.solve(B, v),
                                   rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(btran(v.copy(), *etas, count), np.linalg.solve(B.T, v),
                                   rtol=1e-10, atol=1e-10)


@needs_numba
def test_distances_agree():
    rng = np.random.default_rng(3)
    a = rng.uniform(0, 1e4, (30, 2))
    b = rng.uniform(0, 1e4, (17, 2))
    np.testing.assert_allclose(kernels.pairwise_distances_nb(a, b),
                               kernels.pairwise_distances_np(a, b), rtol=1e-15)
    d = kernels.pairwise_distances(a)
    assert d.shape == (30, 30) and np.all(np.diag(d) == 0)


_PROBE = """
import json
from uavrelay._accel import backend_name
from conftest import make_instance
from uavrelay.solvers import solve_dmlp, solve_milp
_, _, nets, dems, cfg = make_instance(21, clusters=3, grid=(4, 4))
m = solve_milp(nets[0], dems[0], cfg)
d = solve_dmlp(nets[0], dems[0], cfg)
print(json.dumps({"backend": backend_name(), "milp": m.objective, "dmlp": d.objective,
                  "x": m.x.tolist(), "xd": d.x.tolist()}))
"""


def _probe(no_numba):
    env = dict(os.environ)
    env.pop("UAVRELAY_NO_NUMBA", None)
    if no_numba:
        env["UAVRELAY_NO_NUMBA"] = "1"
    tests = os.path.dirname(__file__)
    proc = subprocess.run([sys.executable, "-c", _PROBE], capture_output=True, text=True,
                          env=env, cwd=tests, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


@needs_numba
def test_backends_give_the_same_decisions():
    fast, slow = _probe(False), _probe(True)
    assert fast["backend"] == "numba" and slow["backend"] == "numpy"
    assert fast["milp"] == pytest.approx(slow["milp"], abs=1e-9)
    assert fast["dmlp"] == pytest.approx(slow["dmlp"], abs=1e-9)
    assert fast["x"] == slow["x"] and fast["xd"] == slow["xd"]


def test_backend_name_matches_flag():
    flag = os.environ.get("UAVRELAY_NO_NUMBA", "").strip().lower()
    expected = "numpy" if (flag not in ("", "0", "false", "no") or not HAVE_NUMBA) else "numba"
    assert backend_name() == expected
