"""Shared oracles and generators for the test suite."""
import numpy as np


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def kron_oracle(a, b):
    """Kronecker product by explicit block assignment."""
    m, n = a.shape
    p, q = b.shape
    out = np.zeros((m * p, n * q), dtype=complex)
    for i in range(m):
        for j in range(n):
            out[i * p : (i + 1) * p, j * q : (j + 1) * q] = a[i, j] * b
    return out


def vec_oracle(a):
    return np.array([a[i, j] for j in range(a.shape[1]) for i in range(a.shape[0])])


def max_correlation_atom(phi, y):
    """Exhaustive oracle: column with the largest normalized correlation (lowest index on ties)."""
    phi = np.asarray(phi)
    norms = np.linalg.norm(phi, axis=0)
    corr = np.abs(phi.conj().T @ y) / np.where(norms > 0, norms, 1.0)
    best = corr.max()
    return int(np.flatnonzero(corr >= best * (1 - 1e-12))[0])


def hard_threshold_oracle(v, l):
    """Keep the ``l`` largest magnitudes via a full stable sort (lowest index wins ties)."""
    v = np.asarray(v)
    mag = np.abs(v)
    order = sorted(range(v.size), key=lambda i: (-mag[i], i))
    out = np.zeros_like(v)
    for i in order[:l]:
        out[i] = v[i]
    return out
