"""Pure-numpy kernels. Reference path and fallback when numba is disabled."""
import numpy as np


def top_k(mag, k):
    """Indices of the ``k`` largest entries of ``mag``, ascending.

    Ties at the threshold magnitude go to the lowest indices.
    """
    n = mag.shape[0]
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    if k >= n:
        return np.arange(n, dtype=np.int64)
    thr = np.partition(mag, n - k)[n - k]
    above = np.flatnonzero(mag > thr)
    ties = np.flatnonzero(mag == thr)[: k - above.size]
    return np.sort(np.concatenate([above, ties])).astype(np.int64)


def sparse_residual(phi, y, idx, vals):
    return y - phi[:, idx] @ vals


def iht_run(phi, phi_h, y, z, l, mu, iters, check_increase, slack):
    """Run up to ``iters`` hard-thresholded gradient steps from ``z``.

    Returns ``(z, steps_done, residual_norms, increased)``. When
    ``check_increase`` is set and a step would raise the residual norm by
    more than ``slack``, that step is discarded and the loop stops early with
    ``increased=True`` so the caller can shrink the step size.
    """
    z = z.copy()
    supp = np.flatnonzero(z)
    r = sparse_residual(phi, y, supp, z[supp])
    res = [float(np.linalg.norm(r))]
    for k in range(iters):
        g = z + mu * (phi_h @ r)
        keep = top_k(np.abs(g), l)
        z_new = np.zeros_like(z)
        z_new[keep] = g[keep]
        r_new = sparse_residual(phi, y, keep, z_new[keep])
        rn = float(np.linalg.norm(r_new))
        if check_increase and rn > res[-1] + slack:
            return z, k, np.asarray(res), True
        z, r = z_new, r_new
        res.append(rn)
    return z, iters, np.asarray(res), False
