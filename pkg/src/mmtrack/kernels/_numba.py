"""numba-compiled kernels. Same contracts as :mod:`mmtrack.kernels._numpy`."""
import numpy as np
from numba import njit


@njit(cache=True)
def top_k(mag, k):
    n = mag.shape[0]
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    if k >= n:
        return np.arange(n).astype(np.int64)
    thr = np.partition(mag, n - k)[n - k]
    out = np.empty(k, dtype=np.int64)
    n_above = 0
    for i in range(n):
        if mag[i] > thr:
            n_above += 1
    need_ties = k - n_above
    c = 0
    for i in range(n):
        if mag[i] > thr:
            out[c] = i
            c += 1
        elif mag[i] == thr and need_ties > 0:
            out[c] = i
            c += 1
            need_ties -= 1
    return out


@njit(cache=True)
def sparse_residual(phi, y, idx, vals):
    r = y.copy()
    m = phi.shape[0]
    for j in range(idx.shape[0]):
        c = idx[j]
        v = vals[j]
        if v == 0:
            continue
        for i in range(m):
            r[i] -= phi[i, c] * v
    return r


@njit(cache=True)
def _norm(r):
    s = 0.0
    for i in range(r.shape[0]):
        s += r[i].real * r[i].real + r[i].imag * r[i].imag
    return np.sqrt(s)


@njit(cache=True)
def iht_run(phi, phi_h, y, z, l, mu, iters, check_increase, slack):
    z = z.copy()
    n = z.shape[0]
    nnz = 0
    for i in range(n):
        if z[i] != 0:
            nnz += 1
    supp = np.empty(nnz, dtype=np.int64)
    c = 0
    for i in range(n):
        if z[i] != 0:
            supp[c] = i
            c += 1
    r = sparse_residual(phi, y, supp, z[supp])
    res = np.empty(iters + 1)
    res[0] = _norm(r)
    for k in range(iters):
        g = z + mu * np.dot(phi_h, r)
        keep = top_k(np.abs(g), l)
        z_new = np.zeros_like(z)
        for j in range(keep.shape[0]):
            z_new[keep[j]] = g[keep[j]]
        r_new = sparse_residual(phi, y, keep, z_new[keep])
        rn = _norm(r_new)
        if check_increase and rn > res[k] + slack:
            return z, k, res[: k + 1].copy(), True
        z = z_new
        r = r_new
        res[k + 1] = rn
    return z, iters, res, False
