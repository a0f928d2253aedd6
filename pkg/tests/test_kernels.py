import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robustfolio import _kernels
from robustfolio.solver import _reduce
from robustfolio.theorem import Caps, random_instance

BACKENDS = _kernels.backends()
needs_compiled = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled kernels not built")


def _tableau(rng):
    m, n = int(rng.integers(1, 8)), int(rng.integers(1, 10))
    A = rng.integers(-4, 5, (m, n)).astype(float)
    b = rng.integers(0, 6, m).astype(float)
    c = rng.integers(-4, 5, n).astype(float)
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = c
    return T, np.arange(n, n + m, dtype=np.intp), n + m


@needs_compiled
@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31))
def test_simplex_pivot_backends_agree(seed):
    T0, b0, ncols = _tableau(np.random.default_rng(seed))
    out = {}
    for name, mod in BACKENDS.items():
        T, basis = T0.copy(), b0.copy()
        status, it = mod.simplex_pivot(T, basis, ncols, 1e-11, 10000)
        out[name] = (status, it, T, basis)
    (s1, i1, T1, B1), (s2, i2, T2, B2) = out["python"], out["cython"]
    assert (s1, i1) == (s2, i2)
    np.testing.assert_array_equal(B1, B2)
    np.testing.assert_allclose(T1, T2, rtol=1e-12, atol=1e-12)


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_eu_supergradient_backends_agree(seed):
    inst = random_instance(np.random.default_rng([17, seed]), Caps(leaves=4, assets=2, vertices=3))
    B = np.ascontiguousarray(_reduce(inst.market).B)
    P = np.ascontiguousarray(inst.priors.matrix)
    w0 = np.zeros(B.shape[1])
    base = (B, P, inst.utility.code, float(inst.utility.param), inst.x, w0, 1.0, 10.0)
    # short runs follow the same trajectory
    wp, vp, ip = BACKENDS["python"].eu_supergradient(*base, 100)
    wc, vc, ic = BACKENDS["cython"].eu_supergradient(*base, 100)
    assert ip == ic
    np.testing.assert_allclose(wp, wc, rtol=1e-8, atol=1e-10)
    assert vp == pytest.approx(vc, rel=1e-12, abs=1e-14)
    # long runs may split at a kink (summation order decides ties), but the
    # best values must still agree
    _, vp, _ = BACKENDS["python"].eu_supergradient(*base, 2000)
    _, vc, _ = BACKENDS["cython"].eu_supergradient(*base, 2000)
    assert vp == pytest.approx(vc, rel=1e-9, abs=1e-12)


@needs_compiled
@pytest.mark.parametrize("seed", range(5))
def test_grid_scan_backends_agree(seed):
    inst = random_instance(np.random.default_rng([18, seed]), Caps(leaves=4, assets=2, depth=1))
    Gn = np.ascontiguousarray(inst.market.node_gains)
    Gl = np.ascontiguousarray(inst.market.terminal_gains)
    P = np.ascontiguousarray(inst.priors.matrix)
    k = Gn.shape[1]
    lo, hi = -np.ones(k), np.ones(k)
    npts = np.full(k, 21, dtype=np.int64)
    args = (Gn, Gl, P, inst.utility.code, float(inst.utility.param), inst.x, lo, hi, npts)
    hp, vp, cp = BACKENDS["python"].grid_scan(*args)
    hc, vc, cc = BACKENDS["cython"].grid_scan(*args)
    assert cp == cc
    assert vp == pytest.approx(vc, rel=1e-12)
    np.testing.assert_allclose(hp, hc)


def test_pure_python_switch():
    code = "from robustfolio import _kernels; print(_kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                         env={"ROBUSTFOLIO_PURE_PYTHON": "1", "PATH": ""}, check=True)
    assert out.stdout.strip() == "python"
