import os
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from overdisp import kernels
from overdisp.kernels import _scalar
from overdisp.quad import _rule

pytestmark = pytest.mark.skipif(kernels.numba_backend is None, reason="numba not active")

RNG = np.random.default_rng(0)
Y = np.concatenate([np.arange(0, 40), RNG.integers(0, 400, 60)]).astype(float)
MU = RNG.uniform(0.05, 60.0, Y.size)


def test_lgamma_backends_agree():
    x = np.geomspace(1e-3, 1e6, 500)
    assert_allclose(kernels.numba_backend.lgamma_arr(x),
                    kernels.numpy_backend.lgamma_arr(x), rtol=1e-14, atol=1e-14)
    assert _scalar.lanczos_lgamma(3.0) == pytest.approx(np.log(2.0), abs=1e-15)


@pytest.mark.parametrize("tau", [1e-9, 1e-3, 0.5, 6.0, 50.0])
def test_nb_backends_agree(tau):
    a = kernels.numba_backend.nb_logpmf_arr(Y, MU, tau)
    b = kernels.numpy_backend.nb_logpmf_arr(Y, MU, tau)
    assert_allclose(a, b, rtol=1e-12, atol=1e-11)


def test_poisson_backends_agree():
    assert_allclose(kernels.numba_backend.poisson_logpmf_arr(Y, MU),
                    kernels.numpy_backend.poisson_logpmf_arr(Y, MU), rtol=1e-13, atol=1e-12)


@pytest.mark.parametrize("m", [8, 40, 80])
@pytest.mark.parametrize("disp", [1e-6, 0.405, 1.946, 6.0])
def test_mixture_backends_agree(m, disp):
    t, lw2 = _rule(m)
    eta = np.log(MU)
    a = kernels.numba_backend.ln_logpmf_arr(Y, eta, disp, t, lw2)
    b = kernels.numpy_backend.ln_logpmf_arr(Y, eta, disp, t, lw2)
    assert_allclose(a, b, rtol=1e-11, atol=1e-11)
    a = kernels.numba_backend.ig_logpmf_arr(Y, MU, disp, t, lw2)
    b = kernels.numpy_backend.ig_logpmf_arr(Y, MU, disp, t, lw2)
    assert_allclose(a, b, rtol=1e-11, atol=1e-11)


def test_env_flag_selects_numpy():
    env = dict(os.environ, OVERDISP_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "import overdisp.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
