"""Monte Carlo experiments: tracking MSE, beamforming rate and operation counts.

Every realization draws its channel from a stream keyed only by
``(seed, realization)``, so all cells (values of M and SNR) see the same
channel sequences, and every estimator within a cell consumes the very same
measurements. Training beams and noise come from a stream keyed by
``(seed, realization, M, SNR index)``. Worker count therefore never changes
results.
"""
import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial

import numpy as np

from mmtrack.channel import channel_sequence
from mmtrack.config import RunConfig, build_config
from mmtrack.estimators import full_greedy_step, track
from mmtrack.metrics import (
    BeamformingLink,
    NoiseScenario,
    achievable_rate,
    atom_vectors,
    cosamp_macs_formula,
    iht_macs_formula,
    make_beamformers,
    mse,
    to_db,
)
from mmtrack.numerics import principal_svd
from mmtrack.sensing import full_dictionary, make_training, measure, with_snr

log = logging.getLogger(__name__)

_CHANNEL_STREAM = 0
_SENSING_STREAM = 1
_FIXED_TRAINING = 1 << 16


@dataclass
class ExperimentRecord:
    experiment: str
    estimator: str
    cell: dict
    parameters: dict = field(repr=False)
    per_block_mse: list | None = None
    per_realization_mse: list | None = field(default=None, repr=False)
    mean_mse: float | None = None
    mean_mse_db: float | None = None
    per_block_rate: list | None = field(default=None, repr=False)
    per_realization_rate: list | None = field(default=None, repr=False)
    mean_rate_bps_hz: float | None = None
    op_counts: dict = field(default_factory=dict)
    stream_checksum: str = ""

    def to_dict(self):
        return asdict(self)


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def channel_rng(seed, realization):
    return _rng(seed, realization, _CHANNEL_STREAM)


def sensing_rng(seed, realization, m, snr_index):
    return _rng(seed, realization, _SENSING_STREAM, m, snr_index)


def stream_checksum(states, measurements):
    """SHA-256 over the channel draws and measurement vectors of one realization."""
    h = hashlib.sha256()
    for s in states:
        for a in (s.aods, s.aoas, s.gains):
            h.update(np.ascontiguousarray(a).tobytes())
    for y in measurements:
        h.update(np.ascontiguousarray(y).tobytes())
    return h.hexdigest()


def _combine_checksums(parts):
    h = hashlib.sha256()
    for p in parts:
        h.update(p.encode())
    return h.hexdigest()


def _simulate(cfg, params, realization, m, snr_index, train_snr_db):
    states = channel_sequence(params, cfg.blocks, channel_rng(cfg.seed, realization))
    rng = sensing_rng(cfg.seed, realization, m, snr_index)
    setup = with_snr(make_training(cfg.n_t, cfg.n_r, m, m, cfg.scheme, rng), train_snr_db)
    ys = [measure(s.h, setup, rng) for s in states]
    return states, setup, ys


def _op_summary(estimates):
    rows = estimates[0].dictionary.shape[0]
    tracking = estimates[1:]
    macs = sum(e.op_count for e in tracking)
    iters = sum(e.solver_report.iterations_used for e in tracking)
    predicted = 0
    for e in tracking:
        cols = e.dictionary.shape[1]
        k = e.solver_report.iterations_used
        if e.solver_report.step_size is not None:
            predicted += iht_macs_formula(k, cols, rows)
        else:
            predicted += cosamp_macs_formula(k, cols, rows)
    cols_tracking = [e.dictionary.shape[1] for e in tracking]
    return {
        "rows": rows,
        "block1_macs": estimates[0].op_count,
        "block1_iterations": estimates[0].solver_report.iterations_used,
        "tracking_blocks": len(tracking),
        "tracking_macs": macs,
        "tracking_iterations": iters,
        "tracking_predicted_macs": predicted,
        "tracking_columns": int(round(np.mean(cols_tracking))) if cols_tracking else 0,
        "total_macs": macs + estimates[0].op_count,
    }


def _track_all(cfg, params, ecfg, setup, ys):
    fd = full_dictionary(setup, cfg.n_t, cfg.n_r, cfg.g_t, cfg.g_r)
    first = full_greedy_step(ys[0], fd, ecfg)
    return {kind: track(ys, kind, setup, params, ecfg, fd, first=first) for kind in cfg.estimators}


def mse_realization(cfg, m, snr_index, realization):
    """Per-block squared errors and op counts of every estimator on one realization."""
    params = cfg.channel_params()
    ecfg = cfg.estimator_config()
    states, setup, ys = _simulate(cfg, params, realization, m, snr_index, cfg.snr_db[snr_index])
    out = {}
    for kind, ests in _track_all(cfg, params, ecfg, setup, ys).items():
        pairs = [atom_vectors(s, e) for s, e in zip(states, ests)]
        errs = [mse([z], [zt]) for z, zt in pairs]
        out[kind] = (errs, _op_summary(ests))
    return stream_checksum(states, ys), out


def rate_realization(cfg, m, realization):
    """Per-block rates for every estimator and SNR point on one realization.

    Returns ``{snr_index: (checksum, {estimator: rates}, perfect_rates, ops)}``.
    """
    params = cfg.channel_params()
    ecfg = cfg.estimator_config()
    fixed = cfg.train_snr_db is not None
    out = {}
    cache = None
    for si, snr in enumerate(cfg.snr_db):
        snr_lin = 10 ** (snr / 10)
        if fixed and cache is not None:
            states, ys, tracked = cache
        else:
            key = _FIXED_TRAINING if fixed else si
            states, setup, ys = _simulate(cfg, params, realization, m, key, cfg.train_snr_db if fixed else snr)
            tracked = _track_all(cfg, params, ecfg, setup, ys)
            cache = (states, ys, tracked)
        perfect = [math.log2(1.0 + snr_lin * principal_svd(s.h)[1] ** 2) for s in states]
        rates = {}
        ops = {}
        for kind, ests in tracked.items():
            r = []
            for s, e in zip(states, ests):
                v, u = make_beamformers(e.h_hat, cfg.constant_modulus)
                r.append(achievable_rate(s.h, BeamformingLink(v, u, snr_lin, 1.0)))
            rates[kind] = r
            ops[kind] = _op_summary(ests)
        out[si] = (stream_checksum(states, ys), rates, perfect, ops)
    return out


def _pmap(fn, items, workers):
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def _sum_ops(op_list):
    keys = op_list[0].keys()
    total = {k: sum(o[k] for o in op_list) for k in keys}
    total["rows"] = op_list[0]["rows"]
    total["tracking_columns"] = op_list[0]["tracking_columns"]
    total["realizations"] = len(op_list)
    return total


def _cfg(config):
    if isinstance(config, RunConfig):
        return config
    return build_config(config)


def iter_mse_experiment(config, experiment="mse"):
    """Yield one :class:`ExperimentRecord` per (estimator, M, SNR) cell as cells finish."""
    cfg = _cfg(config)
    echo = cfg.echo()
    for si, snr in enumerate(cfg.snr_db):
        scenario = NoiseScenario.for_snr(snr)
        for m in cfg.m_values:
            log.info("%s cell M=%d snr=%g dB: %d realizations", experiment, m, snr, cfg.realizations)
            results = _pmap(partial(mse_realization, cfg, m, si), range(cfg.realizations), cfg.workers)
            checksum = _combine_checksums([c for c, _ in results])
            for kind in cfg.estimators:
                errs = np.array([res[kind][0] for _, res in results])
                per_block = errs.mean(axis=0)
                mean_mse = float(per_block.mean())
                yield ExperimentRecord(
                    experiment=experiment,
                    estimator=kind,
                    cell={
                        "m": m,
                        "snr_db": snr,
                        "scenario": scenario.label,
                        "n_t": cfg.n_t,
                        "n_r": cfg.n_r,
                        "g_t": cfg.g_t,
                        "g_r": cfg.g_r,
                        "gbar_t": cfg.gbar_t,
                        "gbar_r": cfg.gbar_r,
                    },
                    parameters=echo,
                    per_block_mse=per_block.tolist(),
                    per_realization_mse=errs.mean(axis=1).tolist(),
                    mean_mse=mean_mse,
                    mean_mse_db=to_db(mean_mse),
                    op_counts=_sum_ops([res[kind][1] for _, res in results]),
                    stream_checksum=checksum,
                )


def run_mse_experiment(config):
    return list(iter_mse_experiment(config))


def iter_rate_experiment(config):
    cfg = _cfg(config)
    echo = cfg.echo()
    for m in cfg.m_values:
        log.info("rate cell M=%d: %d realizations", m, cfg.realizations)
        results = _pmap(partial(rate_realization, cfg, m), range(cfg.realizations), cfg.workers)
        for si, snr in enumerate(cfg.snr_db):
            checksum = _combine_checksums([res[si][0] for res in results])
            cell = {"m": m, "snr_db": snr, "n_t": cfg.n_t, "n_r": cfg.n_r, "g_t": cfg.g_t, "g_r": cfg.g_r}
            series = {kind: np.array([res[si][1][kind] for res in results]) for kind in cfg.estimators}
            series["perfect"] = np.array([res[si][2] for res in results])
            for kind, rates in series.items():
                ops = _sum_ops([res[si][3][kind] for res in results]) if kind != "perfect" else {}
                yield ExperimentRecord(
                    experiment="rate",
                    estimator=kind,
                    cell=dict(cell),
                    parameters=echo,
                    per_block_rate=rates.mean(axis=0).tolist(),
                    per_realization_rate=rates.mean(axis=1).tolist(),
                    mean_rate_bps_hz=float(rates.mean()),
                    op_counts=ops,
                    stream_checksum=checksum,
                )


def run_rate_experiment(config):
    return list(iter_rate_experiment(config))


def iter_complexity_experiment(config):
    yield from iter_mse_experiment(config, experiment="complexity")


def run_complexity_experiment(config):
    return list(iter_complexity_experiment(config))


def complexity_report(records):
    """Measured versus predicted multiply-accumulate counts over the tracking blocks.

    Block 1 (always a full-dictionary search) is excluded, matching the
    steady-state formulas. One row per record, plus one ``full/alg1`` ratio
    row per cell comparing per-iteration costs with ``G_T G_R / (L^2 Gbar_T Gbar_R)``.
    """
    rows = []
    by_cell = {}
    for rec in records:
        ops = rec.op_counts
        if not ops or not ops.get("tracking_iterations"):
            continue
        measured = ops["tracking_macs"]
        predicted = ops["tracking_predicted_macs"]
        per_iter = measured / ops["tracking_iterations"]
        row = {
            "kind": "estimator",
            "estimator": rec.estimator,
            "m": rec.cell.get("m"),
            "snr_db": rec.cell.get("snr_db"),
            "g_t": rec.cell.get("g_t"),
            "g_r": rec.cell.get("g_r"),
            "columns": ops["tracking_columns"],
            "measured_macs": measured,
            "predicted_macs": predicted,
            "measured_over_predicted": measured / predicted if predicted else math.nan,
            "iterations": ops["tracking_iterations"],
            "macs_per_iteration": per_iter,
        }
        rows.append(row)
        key = (rec.cell.get("m"), rec.cell.get("snr_db"), rec.cell.get("g_t"), rec.cell.get("g_r"))
        by_cell.setdefault(key, {})[rec.estimator] = (row, rec)
    for key, entries in by_cell.items():
        if "full" in entries and "alg1" in entries:
            full_row, rec = entries["full"]
            alg1_row, _ = entries["alg1"]
            paths = rec.parameters.get("paths", 1)
            predicted = (rec.cell["g_t"] * rec.cell["g_r"]) / (paths**2 * rec.cell["gbar_t"] * rec.cell["gbar_r"])
            measured = full_row["macs_per_iteration"] / alg1_row["macs_per_iteration"]
            rows.append(
                {
                    "kind": "ratio",
                    "estimator": "full/alg1",
                    "m": key[0],
                    "snr_db": key[1],
                    "g_t": key[2],
                    "g_r": key[3],
                    "measured_ratio": measured,
                    "predicted_ratio": predicted,
                    "measured_over_predicted": measured / predicted,
                }
            )
    return rows


RUNNERS = {
    "mse": iter_mse_experiment,
    "rate": iter_rate_experiment,
    "complexity": iter_complexity_experiment,
}
