import os
import subprocess
import sys

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from prandtl_lab import _accel


def _system(seed, m, n, cplx=False):
    r = np.random.default_rng(seed)
    lo = r.uniform(-1, 1, (m, n))
    up = r.uniform(-1, 1, (m, n))
    di = 2.5 + r.uniform(0, 1, (m, n))
    rhs = r.standard_normal((m, n))
    if cplx:
        rhs = rhs + 1j * r.standard_normal((m, n))
        di = di + 0.3j
    return lo, di, up, rhs


def _dense(lo, di, up):
    n = di.size
    return np.diag(di) + np.diag(lo[1:], -1) + np.diag(up[:-1], 1)


@given(st.integers(0, 10**6), st.integers(1, 5), st.integers(2, 40), st.booleans())
def test_thomas_backends_agree_with_dense(seed, m, n, cplx):
    lo, di, up, rhs = _system(seed, m, n, cplx)
    a = _accel.thomas_batch_numpy(lo, di, up, rhs)
    b = _accel.thomas_batch_numba(lo, di, up, rhs)
    ref = np.array([np.linalg.solve(_dense(lo[j], di[j], up[j]), rhs[j]) for j in range(m)])
    np.testing.assert_allclose(a, ref, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-14)


@given(st.floats(1e-3, 10), st.floats(0.01, 100))
def test_log_mean_inverse_matches_quadrature(wa, ratio):
    wb = wa * ratio
    s = np.linspace(0, 1, 20001)
    ref = np.trapezoid(1.0 / (wa + (wb - wa) * s), s)
    for fn in (_accel.log_mean_inverse_numpy, _accel.log_mean_inverse_numba):
        assert abs(float(fn(np.array([wa]), np.array([wb]))[0]) - ref) <= 1e-6 * ref


def test_log_mean_inverse_continuous_at_equal_values():
    wa = np.array([0.7, 0.7, 0.7])
    wb = wa * np.array([1.0, 1 + 1e-7, 1 + 1e-5])
    for fn in (_accel.log_mean_inverse_numpy, _accel.log_mean_inverse_numba):
        out = fn(wa, wb)
        np.testing.assert_allclose(out, [1 / 0.7, 1 / 0.7, 1 / 0.7], rtol=1e-5)
        assert out[0] >= out[1] >= out[2]


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, PLAB_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from prandtl_lab import backend; print(backend())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"
