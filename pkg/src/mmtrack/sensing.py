"""Training beams, angle dictionaries and noisy measurements.

A dictionary column ``k`` stands for the grid pair ``(i_tx, i_rx)`` with
``k = i_tx * n_rx_angles + i_rx``; this is the ordering produced by
``kron(F^T conj(A_T), W^H A_R)``.
"""
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from mmtrack.channel import steering_matrix
from mmtrack.numerics import kron, vectorize, wrap_angle, wrapped_difference

SCHEMES = ("random-phase", "dft-subset")

# Dictionaries with more entries than this are kept in Kronecker-factored form.
DENSE_LIMIT = 1 << 22


@dataclass(frozen=True, eq=False)
class SensingSetup:
    f: np.ndarray
    w: np.ndarray
    p_tr: float
    sigma2: float
    cached_kron: np.ndarray = field(repr=False)

    @property
    def n_t(self):
        return self.f.shape[0]

    @property
    def n_r(self):
        return self.w.shape[0]

    @property
    def m_t(self):
        return self.f.shape[1]

    @property
    def m_r(self):
        return self.w.shape[1]

    @property
    def snr_db(self):
        return 10 * math.log10(self.p_tr / self.sigma2) if self.p_tr > 0 else -math.inf


def _training_matrix(n, m, scheme, rng):
    if scheme == "random-phase":
        return np.exp(1j * rng.uniform(0.0, 2 * np.pi, (n, m))) / np.sqrt(n)
    if scheme == "dft-subset":
        if m > n:
            raise ValueError(f"dft-subset needs m <= n, got m={m}, n={n}")
        cols = np.sort(rng.choice(n, size=m, replace=False))
        k = np.arange(n)[:, None]
        return np.exp(-2j * np.pi * k * cols[None, :] / n) / np.sqrt(n)
    raise ValueError(f"unknown training scheme {scheme!r}; expected one of {SCHEMES}")


def make_training(n_t, n_r, m_t, m_r, scheme="random-phase", rng=None, p_tr=1.0, sigma2=1.0, max_m=4096):
    """Constant-modulus training beamformers ``F`` (``n_t x m_t``) and combiners ``W``."""
    if rng is None:
        rng = np.random.default_rng()
    if not (1 <= m_t <= max_m and 1 <= m_r <= max_m):
        raise ValueError(f"m_t and m_r must lie in [1, {max_m}]")
    if p_tr < 0 or sigma2 < 0:
        raise ValueError("p_tr and sigma2 must be nonnegative")
    f = _training_matrix(n_t, m_t, scheme, rng)
    w = _training_matrix(n_r, m_r, scheme, rng)
    return SensingSetup(f, w, float(p_tr), float(sigma2), kron(f.T, w.conj().T))


def with_snr(setup, snr_db):
    """Same beams, training power set so that ``p_tr / sigma2`` equals ``snr_db``."""
    return SensingSetup(setup.f, setup.w, setup.sigma2 * 10 ** (snr_db / 10), setup.sigma2, setup.cached_kron)


def uniform_grid(g):
    if g < 1:
        raise ValueError("grid size must be >= 1")
    return 2 * np.pi * np.arange(g) / g


class KronOperator:
    """Implicit ``kron(b_t, b_r)`` used for dictionaries too large to store.

    Products exploit ``kron(b_t, b_r)^H vec(R) = vec(b_r^H R conj(b_t))``.
    """

    def __init__(self, b_t, b_r):
        self.b_t = np.asarray(b_t)
        self.b_r = np.asarray(b_r)
        self.shape = (self.b_t.shape[0] * self.b_r.shape[0], self.b_t.shape[1] * self.b_r.shape[1])

    def rmatvec(self, r):
        m_t, g_t = self.b_t.shape
        m_r, g_r = self.b_r.shape
        rmat = r.reshape((m_r, m_t), order="F")
        z = (rmat.T.conj() @ self.b_r).T.conj() @ self.b_t.conj()
        return z.reshape(-1, order="F")

    def rmatvec_macs(self):
        m_t, g_t = self.b_t.shape
        m_r, g_r = self.b_r.shape
        return m_r * m_t * g_t + g_r * m_r * g_t

    def columns(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        g_r = self.b_r.shape[1]
        it, ir = np.divmod(idx, g_r)
        bt = self.b_t[:, it]
        br = self.b_r[:, ir]
        return (bt[:, None, :] * br[None, :, :]).reshape(self.shape[0], idx.size)

    def column_norms(self):
        nt = np.linalg.norm(self.b_t, axis=0)
        nr = np.linalg.norm(self.b_r, axis=0)
        return np.outer(nt, nr).reshape(-1)

    def toarray(self):
        return np.kron(self.b_t, self.b_r)


@dataclass(frozen=True, eq=False)
class Dictionary:
    tx_angles: np.ndarray
    rx_angles: np.ndarray
    a_t: np.ndarray = field(repr=False)
    a_r: np.ndarray = field(repr=False)
    phi: object = field(repr=False)

    @property
    def n_columns(self):
        return self.tx_angles.size * self.rx_angles.size

    @property
    def shape(self):
        return self.phi.shape

    @property
    def is_dense(self):
        return isinstance(self.phi, np.ndarray)

    def matrix(self):
        return self.phi if self.is_dense else self.phi.toarray()

    def columns(self, idx):
        if self.is_dense:
            return self.phi[:, np.asarray(idx, dtype=np.int64)]
        return self.phi.columns(idx)

    @cached_property
    def column_norms(self):
        if self.is_dense:
            return np.linalg.norm(self.phi, axis=0)
        return self.phi.column_norms()

    def decode(self, index):
        return decode_support(index, self)


def full_dictionary(setup, n_t, n_r, g_t, g_r, dense_limit=DENSE_LIMIT):
    """Sensing matrix over the complete uniform ``g_t x g_r`` angle grid."""
    tx = uniform_grid(g_t)
    rx = uniform_grid(g_r)
    a_t = steering_matrix(n_t, tx)
    a_r = steering_matrix(n_r, rx)
    b_t = math.sqrt(setup.p_tr) * (setup.f.T @ a_t.conj())
    b_r = setup.w.conj().T @ a_r
    if b_t.shape[0] * b_r.shape[0] * g_t * g_r <= dense_limit:
        phi = np.kron(b_t, b_r)
    else:
        phi = KronOperator(b_t, b_r)
    return Dictionary(tx, rx, a_t, a_r, phi)


def _grid_around(center, delta, g):
    if g == 1 or delta == 0:
        return wrap_angle(np.array([center], dtype=float))
    return wrap_angle(np.linspace(center - delta, center + delta, g))


def reduced_grids(prev_aods, prev_aoas, delta, g_bar_t, g_bar_r):
    """Per-path angle grids spanning ``[angle - delta, angle + delta]``, endpoints included.

    With ``delta == 0`` each grid collapses to the single previous angle.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if g_bar_t < 1 or g_bar_r < 1:
        raise ValueError("reduced grid sizes must be >= 1")
    tx = [_grid_around(a, delta, g_bar_t) for a in np.atleast_1d(prev_aods)]
    rx = [_grid_around(a, delta, g_bar_r) for a in np.atleast_1d(prev_aoas)]
    return tx, rx


def _dedup(angles):
    keep = []
    for a in angles:
        if not any(abs(wrapped_difference(a, b)) < 1e-12 for b in keep):
            keep.append(a)
    return np.asarray(keep)


def reduced_dictionary(setup, n_t, n_r, grids_t, grids_r, dedup=False):
    """Sensing matrix over concatenated per-path grids, built from ``setup.cached_kron``."""
    tx = np.concatenate([np.atleast_1d(g) for g in grids_t])
    rx = np.concatenate([np.atleast_1d(g) for g in grids_r])
    if dedup:
        tx, rx = _dedup(tx), _dedup(rx)
    a_t = steering_matrix(n_t, tx)
    a_r = steering_matrix(n_r, rx)
    phi = math.sqrt(setup.p_tr) * (setup.cached_kron @ np.kron(a_t.conj(), a_r))
    return Dictionary(tx, rx, a_t, a_r, phi)


def measurement_noise(setup, rng):
    """Noise matrix with entries ``w_q^H n_{q,p}``, ``n_{q,p} ~ CN(0, sigma2 I)``."""
    n = np.sqrt(setup.sigma2 / 2.0) * (
        rng.standard_normal((setup.m_t, setup.m_r, setup.n_r))
        + 1j * rng.standard_normal((setup.m_t, setup.m_r, setup.n_r))
    )
    # n[p, q, :] is the receiver noise while f_p is sent and w_q listens
    return np.einsum("iq,pqi->qp", setup.w.conj(), n)


def measure(h, setup, rng):
    """``vec(sqrt(p_tr) W^H H F + N)``, length ``m_t * m_r``."""
    h = np.asarray(h)
    if h.shape != (setup.n_r, setup.n_t):
        raise ValueError(f"channel shape {h.shape} does not match setup ({setup.n_r}, {setup.n_t})")
    y = math.sqrt(setup.p_tr) * (setup.w.conj().T @ h @ setup.f)
    if setup.sigma2 > 0:
        y = y + measurement_noise(setup, rng)
    return vectorize(y)


def decode_support(index, dictionary):
    """Grid angles ``(aod, aoa)`` of dictionary column ``index``."""
    n_rx = dictionary.rx_angles.size
    if not 0 <= index < dictionary.tx_angles.size * n_rx:
        raise IndexError(f"column {index} out of range for {dictionary.tx_angles.size * n_rx} columns")
    i_tx, i_rx = divmod(int(index), n_rx)
    return float(dictionary.tx_angles[i_tx]), float(dictionary.rx_angles[i_rx])


def spatial_key(angle, digits=9):
    """Canonical label of an angle's ULA response.

    Angles sharing ``sin(angle)`` modulo 2 give identical half-wavelength
    responses, so they map to the same key.
    """
    s = np.mod(np.sin(angle) + 1.0, 2.0) - 1.0
    s = np.round(s, digits)
    return np.where(s <= -1.0, 1.0, s) + 0.0


def spatial_distance(a, b):
    """Distance between two angles measured on the (periodic) ``sin`` axis."""
    d = np.mod(np.sin(a) - np.sin(b) + 1.0, 2.0) - 1.0
    return np.abs(d)
