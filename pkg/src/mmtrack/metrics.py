"""Estimation error, beamforming rate and complexity formulas."""
import math
from dataclasses import dataclass

import numpy as np

from mmtrack.numerics import principal_svd
from mmtrack.sensing import spatial_distance, spatial_key

NOISE_SCENARIOS = {"high": -10.0, "low": 0.0}


@dataclass(frozen=True)
class NoiseScenario:
    label: str
    snr_db: float

    def __post_init__(self):
        if self.label in NOISE_SCENARIOS:
            if self.snr_db != NOISE_SCENARIOS[self.label]:
                raise ValueError(f"scenario {self.label!r} is fixed at {NOISE_SCENARIOS[self.label]} dB")
        elif self.label != "custom":
            raise ValueError(f"unknown scenario label {self.label!r}")

    @classmethod
    def for_snr(cls, snr_db):
        for label, value in NOISE_SCENARIOS.items():
            if value == snr_db:
                return cls(label, snr_db)
        return cls("custom", snr_db)


@dataclass(frozen=True, eq=False)
class BeamformingLink:
    v: np.ndarray
    u: np.ndarray
    p: float = 1.0
    sigma2: float = 1.0

    def __post_init__(self):
        for name in ("v", "u"):
            nrm = np.linalg.norm(getattr(self, name))
            if abs(nrm - 1.0) > 1e-12:
                raise ValueError(f"{name} must have unit norm, got {nrm}")


def mse(true_seq, est_seq):
    """Block-averaged squared error ``(1/B) sum_n ||z(n) - z_est(n)||^2``."""
    if len(true_seq) != len(est_seq):
        raise ValueError(f"sequence lengths differ: {len(true_seq)} vs {len(est_seq)}")
    if len(true_seq) == 0:
        raise ValueError("empty sequences")
    total = 0.0
    for n, (z, zt) in enumerate(zip(true_seq, est_seq)):
        z = np.asarray(z)
        zt = np.asarray(zt)
        if z.shape != zt.shape:
            raise ValueError(f"block {n}: dimension mismatch {z.shape} vs {zt.shape}")
        total += float(np.sum(np.abs(z - zt) ** 2))
    return total / len(true_seq)


def to_db(x):
    return 10 * math.log10(x) if x > 0 else -math.inf


def _atom_keys(dictionary, idx):
    n_rx = dictionary.rx_angles.size
    it, ir = np.divmod(np.asarray(idx, dtype=np.int64), n_rx)
    kt = spatial_key(dictionary.tx_angles[it])
    kr = spatial_key(dictionary.rx_angles[ir])
    return list(zip(kt.tolist(), kr.tolist()))


def snap_to_dictionary(aods, aoas, dictionary):
    """Column index of the grid atom nearest each ``(aod, aoa)`` pair.

    Distance is measured on the ``sin`` axis, where the ULA response lives;
    ties go to the lowest grid index.
    """
    n_rx = dictionary.rx_angles.size
    out = []
    for aod, aoa in zip(np.atleast_1d(aods), np.atleast_1d(aoas)):
        # rounding makes alias ties exact, so the lowest index wins
        i = int(np.argmin(np.round(spatial_distance(dictionary.tx_angles, aod), 12)))
        j = int(np.argmin(np.round(spatial_distance(dictionary.rx_angles, aoa), 12)))
        out.append(i * n_rx + j)
    return np.asarray(out, dtype=np.int64)


def atom_vectors(state, estimate):
    """Aligned true and estimated sparse vectors for one block.

    The true vector places each path gain on the estimator's own dictionary
    atom nearest to the path. Atoms with identical columns (angles sharing
    ``sin``) are merged so a choice between aliases is never an error.
    """
    dictionary = estimate.dictionary
    truth = {}
    for key, g in zip(_atom_keys(dictionary, snap_to_dictionary(state.aods, state.aoas, dictionary)), state.gains):
        truth[key] = truth.get(key, 0) + g
    est = {}
    for key, g in zip(_atom_keys(dictionary, estimate.sparse.support), estimate.sparse.gains):
        est[key] = est.get(key, 0) + g
    keys = sorted(set(truth) | set(est))
    z = np.array([truth.get(k, 0) for k in keys], dtype=complex)
    zt = np.array([est.get(k, 0) for k in keys], dtype=complex)
    return z, zt


def make_beamformers(h_hat, constant_modulus=False):
    """Unit-norm ``(v, u)`` from the principal singular pair of ``h_hat``.

    With ``constant_modulus`` each vector keeps only its entry phases, with
    magnitudes ``1/sqrt(N)``.
    """
    u, _, v = principal_svd(h_hat)
    if constant_modulus:
        v = np.exp(1j * np.angle(v)) / np.sqrt(v.size)
        u = np.exp(1j * np.angle(u)) / np.sqrt(u.size)
    return v, u


def achievable_rate(h_true, link):
    """``log2(1 + (p / sigma2) |u^H H v|^2)`` in bits/s/Hz."""
    g = np.vdot(link.u, np.asarray(h_true) @ link.v)
    return math.log2(1.0 + (link.p / link.sigma2) * abs(g) ** 2)


def cosamp_macs_formula(iters, cols, rows):
    """Leading-order CoSaMP cost ``K (cols (rows + 1) + 2 rows)``."""
    return iters * (cols * (rows + 1) + 2 * rows)


def iht_macs_formula(iters, cols, rows):
    """Leading-order IHT cost ``I cols (rows + 1)``."""
    return iters * cols * (rows + 1)
