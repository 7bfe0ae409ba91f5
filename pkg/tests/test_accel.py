import os
import subprocess
import sys

import numpy as np
import pytest

from nonstat_krr import _accel, _hot
from nonstat_krr.kernels import Kernel

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")

KERNELS = [Kernel.gaussian(1.3), Kernel.spline(1), Kernel.spline(2), Kernel.periodic(7.0, 4)]


def _args(k):
    return k._code()


@pytest.mark.parametrize("k", KERNELS)
def test_cross_and_gram_agree(k, rng):
    x, a = rng.uniform(0, 10, 17), rng.uniform(0, 10, 23)
    np.testing.assert_allclose(_hot.cross_nb(x, a, *_args(k)), _hot.cross_np(x, a, *_args(k)),
                               rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(_hot.gram_nb(x, *_args(k)), _hot.gram_np(x, *_args(k)),
                               rtol=1e-13, atol=1e-14)


def test_forward_row_agree(rng):
    n = 30
    m = rng.normal(size=(n, n))
    L = np.linalg.cholesky(m @ m.T + n * np.eye(n))
    buf = np.zeros((n + 5, n + 5))
    buf[:n, :n] = L
    k = rng.normal(size=n)
    np.testing.assert_allclose(_hot.forward_row_nb(buf, n, k), _hot.forward_row_np(buf, n, k),
                               rtol=1e-12)
    np.testing.assert_allclose(L @ _hot.forward_row_np(buf, n, k), k, rtol=1e-12)


def test_pick_falls_back_to_numpy():
    assert _accel.pick(None, len) is len


def test_env_flag_selects_numpy_path():
    code = ("from nonstat_krr import _accel, _hot; "
            "print(_accel.USE_NUMBA, _hot.cross is _hot.cross_np)")
    env = {**os.environ, "NONSTAT_KRR_NUMBA": "0"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True).stdout.split()
    assert out == ["False", "True"]
