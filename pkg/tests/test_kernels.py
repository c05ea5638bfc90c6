import os
import subprocess
import sys

import numpy as np
import pytest
from helpers import crandn, hard_threshold_oracle

from mmtrack.kernels import _numba, _numpy

BACKENDS = [_numpy, _numba]


@pytest.mark.parametrize("impl", BACKENDS, ids=["numpy", "numba"])
def test_top_k_matches_sort_oracle(impl, rng):
    for _ in range(300):
        n = int(rng.integers(1, 50))
        mag = rng.integers(0, 6, n).astype(np.float64)
        k = int(rng.integers(0, n + 3))
        got = impl.top_k(mag, k)
        want = np.sort(sorted(range(n), key=lambda i: (-mag[i], i))[: max(k, 0)])
        np.testing.assert_array_equal(got, want)
        assert got.dtype == np.int64


@pytest.mark.parametrize("impl", BACKENDS, ids=["numpy", "numba"])
def test_sparse_residual(impl, rng):
    phi, y = crandn(rng, 7, 12), crandn(rng, 7)
    idx = np.array([1, 5, 9], dtype=np.int64)
    vals = crandn(rng, 3)
    np.testing.assert_allclose(impl.sparse_residual(phi, y, idx, vals), y - phi[:, idx] @ vals, atol=1e-13)


def _iht_case(rng):
    phi = crandn(rng, 16, 30)
    phi /= np.linalg.norm(phi, axis=0)
    y = crandn(rng, 16)
    z0 = np.zeros(30, dtype=complex)
    z0[3] = 1.0
    return phi, np.ascontiguousarray(phi.conj().T), y, z0


@pytest.mark.parametrize("check", [False, True])
def test_iht_backends_agree(rng, check):
    for _ in range(20):
        phi, phi_h, y, z0 = _iht_case(rng)
        a = _numpy.iht_run(phi, phi_h, y, z0, 2, 0.7, 10, check, 1e-12)
        b = _numba.iht_run(phi, phi_h, y, z0, 2, 0.7, 10, check, 1e-12)
        np.testing.assert_allclose(a[0], b[0], atol=1e-12)
        assert a[1] == b[1] and a[3] == b[3]
        np.testing.assert_allclose(a[2], b[2], rtol=1e-12)


def test_iht_kernel_step_is_thresholded_gradient(rng):
    phi, phi_h, y, z0 = _iht_case(rng)
    z, done, hist, _ = _numpy.iht_run(phi, phi_h, y, z0, 2, 1.0, 1, False, 0.0)
    g = z0 + phi.conj().T @ (y - phi @ z0)
    np.testing.assert_allclose(z, hard_threshold_oracle(g, 2), atol=1e-13)
    assert done == 1 and len(hist) == 2


@pytest.mark.parametrize("flag,expected", [("0", "numpy"), ("off", "numpy"), ("1", "numba")])
def test_backend_env_flag(flag, expected):
    env = dict(os.environ, MMTRACK_NUMBA=flag)
    out = subprocess.run(
        [sys.executable, "-c", "from mmtrack import kernels; print(kernels.BACKEND)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == expected
