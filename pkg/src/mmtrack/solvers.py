"""Sparse recovery engines: CoSaMP and warm-started iterative hard thresholding.

Both solvers accept either a dense ``ndarray`` sensing matrix or a
:class:`~mmtrack.sensing.KronOperator`. ``op_count`` tallies complex
multiply-accumulates spent inside the iterations; one-off preprocessing
(column norms, normalisation, forming ``phi^H``) is not charged.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from mmtrack import kernels
from mmtrack.numerics import RankDeficientError, least_squares, qr_rank_profile

STEP_RULES = ("fixed", "normalized")


@dataclass(frozen=True)
class SolverConfig:
    sparsity: int = 1
    max_iters: int = 10
    residual_tol: float = 1e-6
    step_size: float = 1.0
    normalize_columns: bool = True
    safeguard: bool = False
    step_rule: str = "normalized"

    def __post_init__(self):
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}")
        if self.sparsity < 1:
            raise ValueError("sparsity must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.residual_tol < 0:
            raise ValueError("residual_tol must be >= 0")
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")


@dataclass(eq=False)
class SolverReport:
    support: np.ndarray
    gains: np.ndarray
    n_columns: int
    iterations_used: int
    final_residual: float
    op_count: int
    residual_history: np.ndarray = field(repr=False)
    step_size: float | None = None

    def to_dense(self):
        z = np.zeros(self.n_columns, dtype=complex)
        z[self.support] = self.gains
        return z


def _is_dense(phi):
    return isinstance(phi, np.ndarray)


def _rmatvec(phi, r):
    if _is_dense(phi):
        return (r.conj() @ phi).conj(), phi.shape[0] * phi.shape[1]
    return phi.rmatvec(r), phi.rmatvec_macs()


def _columns(phi, idx):
    if _is_dense(phi):
        return phi[:, idx]
    return phi.columns(idx)


def _column_scale(phi, cfg, col_norms):
    cols = phi.shape[1]
    if not cfg.normalize_columns:
        return np.ones(cols)
    if col_norms is None:
        col_norms = np.linalg.norm(phi, axis=0) if _is_dense(phi) else phi.column_norms()
    col_norms = np.asarray(col_norms, dtype=float)
    scale = np.ones(cols)
    nz = col_norms > 0
    scale[nz] = 1.0 / col_norms[nz]
    return scale


def _ls_macs(rows, s):
    # Householder QR plus Q^H y
    return rows * s * s + rows * s


def cosamp(phi, y, cfg, col_norms=None):
    """Compressive sampling matching pursuit for ``min ||y - phi z||`` with ``||z||_0 <= L``.

    Each iteration correlates the residual with every column, merges the
    ``2L`` strongest atoms into the current support, solves least squares on
    the merged set, prunes to the ``L`` largest coefficients and refits on
    the pruned support. Iteration stops at ``max_iters``, once the relative
    residual reaches ``residual_tol``, when the support stops changing, or
    when an iteration would increase the residual (that iterate is
    discarded, so residuals never increase).

    Columns of the merged support that are linearly dependent on earlier
    ones are dropped, newest first, before the least-squares step.
    """
    rows, cols = phi.shape
    y = np.asarray(y, dtype=complex)
    if y.shape != (rows,):
        raise ValueError(f"y has shape {y.shape}, expected ({rows},)")
    l = cfg.sparsity
    if 3 * l > rows:
        warnings.warn(f"CoSaMP with sparsity {l} on only {rows} measurements", RuntimeWarning, stacklevel=2)
    scale = _column_scale(phi, cfg, col_norms)
    ynorm = float(np.linalg.norm(y))
    support = np.empty(0, dtype=np.int64)
    coef = np.empty(0, dtype=complex)
    if ynorm == 0.0:
        return SolverReport(support, coef, cols, 1, 0.0, 0, np.zeros(1))
    slack = 1e-12 * ynorm
    r = y
    res = ynorm
    hist = [res]
    ops = 0
    it = 0
    while it < cfg.max_iters:
        it += 1
        proxy, macs = _rmatvec(phi, r)
        mag = np.abs(proxy) * scale
        ops += macs + cols
        omega = kernels.top_k(mag, 2 * l)
        omega = omega[np.lexsort((omega, -mag[omega]))]
        fresh = omega[~np.isin(omega, support)]
        merged = np.concatenate([support, fresh])
        a = _columns(phi, merged) * scale[merged]
        q, rr, indep = qr_rank_profile(a)
        ops += _ls_macs(rows, merged.size)
        if indep.all():
            # reuse the factorization from the rank check
            b = scipy.linalg.solve_triangular(rr, q.conj().T @ y, lower=False)
        else:
            merged, a = merged[indep], a[:, indep]
            if merged.size == 0:
                break
            b = least_squares(a, y)
            ops += _ls_macs(rows, merged.size)
        keep = kernels.top_k(np.abs(b), l)
        cand = np.sort(merged[keep])
        ac = _columns(phi, cand) * scale[cand]
        bc = least_squares(ac, y)
        r_new = y - ac @ bc
        ops += _ls_macs(rows, cand.size) + rows * cand.size
        rn = float(np.linalg.norm(r_new))
        if rn > res + slack:
            break
        unchanged = np.array_equal(cand, support)
        support, coef, r, res = cand, bc, r_new, rn
        hist.append(res)
        if res <= cfg.residual_tol * ynorm or unchanged:
            break
    gains = coef * scale[support]
    return SolverReport(support, gains, cols, it, res, int(ops), np.asarray(hist))


def spectral_norm_sq(phi, iters=20):
    """Power-iteration estimate of ``||phi||_2^2`` and its MAC cost."""
    v = np.ones(phi.shape[1], dtype=complex) / np.sqrt(phi.shape[1])
    s = 0.0
    for _ in range(iters):
        u = phi @ v
        v = (u.conj() @ phi).conj()
        s = float(np.linalg.norm(v))
        if s == 0.0:
            break
        v = v / s
    return s, 2 * iters * phi.shape[0] * phi.shape[1]


def iht(phi, y, z0, cfg, col_norms=None):
    """Iterative hard thresholding warm-started at ``z0``.

    Runs exactly ``cfg.max_iters`` steps of

        z_k = H_L(z_{k-1} + mu * phi^H (y - phi z_{k-1}))

    working on unit-norm columns when ``cfg.normalize_columns`` is set. No
    matrix is inverted. ``cfg.step_rule == "fixed"`` uses ``mu =
    cfg.step_size``; ``"normalized"`` picks ``mu`` per step by line search on
    the current support (see :func:`_niht`). The report's ``step_size`` is the
    last ``mu`` used. With ``cfg.safeguard`` (fixed rule only), a step that raises the residual is redone with ``mu``
    capped at ``0.99 / ||phi||_2^2`` (power-iteration estimate) and the cap
    is kept for the remaining steps.
    """
    if not _is_dense(phi):
        phi = phi.toarray()
    rows, cols = phi.shape
    y = np.asarray(y, dtype=complex)
    z0 = np.asarray(z0, dtype=complex)
    if y.shape != (rows,):
        raise ValueError(f"y has shape {y.shape}, expected ({rows},)")
    if z0.shape != (cols,):
        raise ValueError(f"warm start has shape {z0.shape}, expected ({cols},)")
    l = cfg.sparsity
    scale = _column_scale(phi, cfg, col_norms)
    phi_n = np.ascontiguousarray(phi * scale[None, :])
    phi_h = np.ascontiguousarray(phi_n.conj().T)
    zt = z0 / scale
    slack = 1e-12 * float(np.linalg.norm(y))
    step_macs = rows * cols + cols + rows * l
    mu = float(cfg.step_size)
    ops = rows * int(np.count_nonzero(zt))
    if cfg.step_rule == "normalized":
        z, steps, hist, niht_ops, mu = _niht(phi_n, y, zt, l, cfg.max_iters)
        support = np.flatnonzero(z)
        gains = z[support] * scale[support]
        return SolverReport(
            support.astype(np.int64), gains, cols, steps, float(hist[-1]), int(ops + niht_ops), hist, mu
        )
    z, done, hist, increased = kernels.iht_run(phi_n, phi_h, y, zt, l, mu, cfg.max_iters, cfg.safeguard, slack)
    ops += done * step_macs
    steps = done
    if increased:
        ops += step_macs
        steps += 1
        s2, macs = spectral_norm_sq(phi_n)
        ops += macs
        if s2 > 0:
            mu = min(mu, 0.99 / s2)
        z, done2, hist2, _ = kernels.iht_run(phi_n, phi_h, y, z, l, mu, cfg.max_iters - done, False, slack)
        ops += done2 * step_macs
        steps += done2
        hist = np.concatenate([hist, hist2[1:]])
    support = np.flatnonzero(z)
    gains = z[support] * scale[support]
    return SolverReport(support.astype(np.int64), gains, cols, steps, float(hist[-1]), int(ops), hist, mu)


def _niht(phi, y, z, l, iters, kappa=2.0, c=0.01):
    """Normalized IHT: the step is the exact line search along the gradient
    restricted to the current support, halved (roughly) while a support change
    would violate ``mu <= (1 - c) ||dz||^2 / ||phi dz||^2``."""
    rows, cols = phi.shape
    z = z.copy()
    supp = np.flatnonzero(z)
    r = y - phi[:, supp] @ z[supp]
    hist = [float(np.linalg.norm(r))]
    ops = 0
    mu = 1.0
    for _ in range(iters):
        g = (r.conj() @ phi).conj()
        ops += rows * cols
        gam = supp if supp.size else kernels.top_k(np.abs(g), l)
        pg = phi[:, gam] @ g[gam]
        den = float(np.vdot(pg, pg).real)
        ops += rows * gam.size
        mu = float(np.vdot(g[gam], g[gam]).real) / den if den > 0 else 1.0
        while True:
            cand = z + mu * g
            keep = kernels.top_k(np.abs(cand), l)
            z_new = np.zeros_like(z)
            z_new[keep] = cand[keep]
            ops += cols
            if np.array_equal(keep, gam):
                break
            dz = z_new - z
            nz = np.flatnonzero(dz)
            pdz = phi[:, nz] @ dz[nz]
            ops += rows * nz.size
            den = float(np.vdot(pdz, pdz).real)
            if den == 0 or mu <= (1 - c) * float(np.vdot(dz, dz).real) / den:
                break
            mu /= kappa * (1 - c)
        z, supp = z_new, keep
        r = y - phi[:, supp] @ z[supp]
        ops += rows * supp.size
        hist.append(float(np.linalg.norm(r)))
    return z, iters, np.asarray(hist), ops, mu


__all__ = ["SolverConfig", "SolverReport", "cosamp", "iht", "spectral_norm_sq", "RankDeficientError"]
