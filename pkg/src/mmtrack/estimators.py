"""Block-by-block channel trackers.

Three estimators share one interface:

``full``
    CoSaMP over the complete angle dictionary at every block.
``alg1``
    windowed tracking: after block 1, CoSaMP over a small
    dictionary built from ``delta``-wide angle windows around the previous
    block's path estimates.
``alg2``
    warm-started tracking: same reduced dictionary, solved with a few
    warm-started IHT steps instead of CoSaMP.

Block 1 is always solved by the full-dictionary search.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np

from mmtrack.numerics import wrapped_difference
from mmtrack.sensing import full_dictionary, reduced_dictionary, reduced_grids
from mmtrack.solvers import SolverConfig, cosamp, iht

ESTIMATORS = ("full", "alg1", "alg2")


@dataclass(frozen=True)
class EstimatorConfig:
    """Grid sizes and solver knobs shared by all trackers.

    ``delta`` is the tracker-side window half-width; it defaults to the
    channel's drift bound but may differ to study mismatch.
    ``rescan_residual``, when set, falls back to a full-dictionary search
    whenever a tracker's relative residual exceeds it.
    """

    sparsity: int = 1
    g_t: int = 32
    g_r: int = 64
    gbar_t: int = 4
    gbar_r: int = 5
    delta: float = math.radians(3.0)
    cosamp_iters: int = 10
    iht_iters: int = 10
    residual_tol: float = 1e-6
    step_size: float = 1.0
    normalize_columns: bool = True
    safeguard: bool = False
    step_rule: str = "normalized"
    dedup: bool = False
    rescan_residual: float | None = None

    def __post_init__(self):
        if min(self.g_t, self.g_r) < 1:
            raise ValueError("full grid sizes must be >= 1")
        if min(self.gbar_t, self.gbar_r) < 1:
            raise ValueError("reduced grid sizes must be >= 1")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        # validates the solver fields
        self.cosamp_config
        self.iht_config

    @property
    def cosamp_config(self):
        return SolverConfig(
            self.sparsity, self.cosamp_iters, self.residual_tol, self.step_size, self.normalize_columns, self.safeguard
        )

    @property
    def iht_config(self):
        return SolverConfig(
            self.sparsity,
            self.iht_iters,
            0.0,
            self.step_size,
            self.normalize_columns,
            self.safeguard,
            self.step_rule,
        )

    def reduced_columns(self):
        return self.sparsity**2 * self.gbar_t * self.gbar_r


@dataclass(frozen=True, eq=False)
class SparseEstimate:
    support: np.ndarray
    gains: np.ndarray
    paths: tuple

    def to_dense(self, n_columns):
        z = np.zeros(n_columns, dtype=complex)
        z[self.support] = self.gains
        return z


@dataclass(frozen=True, eq=False)
class BlockEstimate:
    kind: str
    block_index: int
    sparse: SparseEstimate
    h_hat: np.ndarray = field(repr=False)
    solver_report: object = field(repr=False)
    dictionary: object = field(repr=False)
    op_count: int = 0


@dataclass(frozen=True, eq=False)
class TrackerState:
    block_index: int
    last_paths: tuple
    last_sparse: SparseEstimate
    dictionary_in_use: object = field(repr=False)


def _reconstruct(dictionary, support, gains):
    n_rx = dictionary.rx_angles.size
    it, ir = np.divmod(np.asarray(support, dtype=np.int64), n_rx)
    a_t = dictionary.a_t[:, it]
    a_r = dictionary.a_r[:, ir]
    return (a_r * gains[None, :]) @ a_t.conj().T


def _fill_paths(y, dictionary, support, gains, l, normalize):
    """Top up ``support`` to ``l`` atoms using the residual's strongest correlations."""
    need = l - support.size
    if need <= 0:
        return support, gains
    phi = dictionary.matrix() if dictionary.is_dense else None
    cols = dictionary.columns(support)
    r = y - cols @ gains
    if phi is not None:
        corr = (r.conj() @ phi).conj()
    else:
        corr = dictionary.phi.rmatvec(r)
    norms = dictionary.column_norms
    mag = np.abs(corr)
    if normalize:
        mag = np.where(norms > 0, mag / np.where(norms > 0, norms, 1.0), 0.0)
    mag[support] = -1.0
    order = np.lexsort((np.arange(mag.size), -mag))[:need]
    extra_gain = np.where(norms[order] > 0, corr[order] / np.where(norms[order] > 0, norms[order] ** 2, 1.0), 0.0)
    sup = np.concatenate([support, order])
    g = np.concatenate([gains, extra_gain])
    o = np.argsort(sup, kind="stable")
    return sup[o], g[o]


def _finish(kind, block_index, y, dictionary, report, cfg, extra_ops=0):
    support, gains = _fill_paths(y, dictionary, report.support, report.gains, cfg.sparsity, cfg.normalize_columns)
    paths = tuple((*dictionary.decode(k), complex(g)) for k, g in zip(support, gains))
    sparse = SparseEstimate(support, gains, paths)
    h_hat = _reconstruct(dictionary, support, gains)
    return BlockEstimate(kind, block_index, sparse, h_hat, report, dictionary, report.op_count + extra_ops)


def full_greedy_step(y_v, full_dict, cfg, block_index=1, kind="full"):
    """CoSaMP over the whole dictionary."""
    report = cosamp(full_dict.phi, y_v, cfg.cosamp_config, full_dict.column_norms)
    return _finish(kind, block_index, y_v, full_dict, report, cfg)


def _state_from(est):
    return TrackerState(est.block_index, est.sparse.paths, est.sparse, est.dictionary)


def initial_state(estimate):
    """Tracker state handed from a block estimate to the next block."""
    return _state_from(estimate)


def _reduced(state, setup, params, cfg):
    aods = [p[0] for p in state.last_paths]
    aoas = [p[1] for p in state.last_paths]
    gt, gr = reduced_grids(aods, aoas, cfg.delta, cfg.gbar_t, cfg.gbar_r)
    return reduced_dictionary(setup, params.n_t, params.n_r, gt, gr, dedup=cfg.dedup)


def _needs_rescan(report, y, cfg):
    if cfg.rescan_residual is None:
        return False
    ynorm = float(np.linalg.norm(y))
    return ynorm > 0 and report.final_residual > cfg.rescan_residual * ynorm


def algorithm1_step(y_v, state, setup, params, cfg, full_dict=None):
    """Windowed step: CoSaMP on the ``delta``-window dictionary."""
    n = state.block_index + 1
    dictionary = _reduced(state, setup, params, cfg)
    report = cosamp(dictionary.phi, y_v, cfg.cosamp_config, dictionary.column_norms)
    if full_dict is not None and _needs_rescan(report, y_v, cfg):
        est = full_greedy_step(y_v, full_dict, cfg, n, kind="alg1")
        est = replace(est, op_count=est.op_count + report.op_count)
    else:
        est = _finish("alg1", n, y_v, dictionary, report, cfg)
    return est, _state_from(est)


def warm_start(paths, dictionary):
    """Place each previous path's gain on its nearest grid pair in ``dictionary``.

    Nearness is wrapped angular distance; ties go to the lowest index.
    """
    z0 = np.zeros(dictionary.n_columns, dtype=complex)
    n_rx = dictionary.rx_angles.size
    for aod, aoa, gain in paths:
        i = int(np.argmin(np.abs(wrapped_difference(dictionary.tx_angles, aod))))
        j = int(np.argmin(np.abs(wrapped_difference(dictionary.rx_angles, aoa))))
        z0[i * n_rx + j] += gain
    return z0


def algorithm2_step(y_v, state, setup, params, cfg, full_dict=None):
    """Warm-started step: IHT on the ``delta``-window dictionary."""
    n = state.block_index + 1
    dictionary = _reduced(state, setup, params, cfg)
    z0 = warm_start(state.last_paths, dictionary)
    report = iht(dictionary.phi, y_v, z0, cfg.iht_config, dictionary.column_norms)
    if full_dict is not None and _needs_rescan(report, y_v, cfg):
        est = full_greedy_step(y_v, full_dict, cfg, n, kind="alg2")
        est = replace(est, op_count=est.op_count + report.op_count)
    else:
        est = _finish("alg2", n, y_v, dictionary, report, cfg)
    return est, _state_from(est)


_STEPS = {"alg1": algorithm1_step, "alg2": algorithm2_step}


def track(measurements, kind, setup, params, cfg, full_dict=None, first=None):
    """Estimate every block of ``measurements`` with estimator ``kind``.

    ``first`` may carry an already computed block-1 full-dictionary
    estimate; it is reused as is (all estimators share that code path).
    """
    if kind not in ESTIMATORS:
        raise ValueError(f"unknown estimator {kind!r}; expected one of {ESTIMATORS}")
    if len(measurements) < 1:
        raise ValueError("need at least one block")
    if full_dict is None:
        full_dict = full_dictionary(setup, params.n_t, params.n_r, cfg.g_t, cfg.g_r)
    est = first if first is not None else full_greedy_step(measurements[0], full_dict, cfg)
    out = [est]
    if kind == "full":
        for n, y in enumerate(measurements[1:], start=2):
            out.append(full_greedy_step(y, full_dict, cfg, n))
        return out
    step = _STEPS[kind]
    rescan_dict = full_dict if cfg.rescan_residual is not None else None
    state = _state_from(est)
    for y in measurements[1:]:
        est, state = step(y, state, setup, params, cfg, rescan_dict)
        out.append(est)
    return out
