"""Dense complex linear algebra and scalar special functions.

Matrices are plain ``numpy.ndarray`` values of dtype ``complex128``. Whatever
the physical memory layout, :func:`vectorize` always stacks columns
(Fortran order), which is the convention the Kronecker identity
``vec(B X A^T) = (A kron B) vec(X)`` depends on.
"""
import numpy as np
import scipy.linalg
import scipy.special

from mmtrack import kernels


class RankDeficientError(np.linalg.LinAlgError):
    """Raised when a least-squares system lacks full column rank.

    ``column`` is the position of the first column found to be (numerically)
    in the span of the columns before it.
    """

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"column {column} is linearly dependent on earlier columns")


def kron(a, b):
    return np.kron(np.asarray(a), np.asarray(b))


def khatri_rao(a, b):
    """Column-wise Kronecker product; ``a`` and ``b`` need equal column counts."""
    a = np.atleast_2d(np.asarray(a))
    b = np.atleast_2d(np.asarray(b))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"khatri_rao needs equal column counts, got {a.shape[1]} and {b.shape[1]}")
    return scipy.linalg.khatri_rao(a, b)


def vectorize(a):
    """Stack the columns of ``a`` top-to-bottom, left-to-right."""
    return np.asarray(a).reshape(-1, order="F")


def unvectorize(v, rows, cols):
    return np.asarray(v).reshape((rows, cols), order="F")


def qr_rank_profile(a, rtol=1e-10):
    """Householder QR of ``a`` plus a mask of numerically independent columns.

    Column ``j`` is flagged dependent when ``|R[j, j]|`` falls below ``rtol``
    times the largest column norm of ``a``. Because Householder QR does not
    pivot, a flagged column lies in the span of the columns before it.
    Columns beyond the row count are always flagged.
    """
    a = np.asarray(a)
    q, r = np.linalg.qr(a, mode="reduced")
    scale = np.max(np.linalg.norm(a, axis=0)) if a.size else 0.0
    independent = np.zeros(a.shape[1], dtype=bool)
    if scale == 0.0:
        return q, r, independent
    diag = np.abs(np.diag(r))
    independent[: diag.size] = diag > rtol * scale
    return q, r, independent


def least_squares(a, y, rtol=1e-10):
    """Solve ``min_x ||y - a x||`` by QR.

    Raises :class:`RankDeficientError` rather than falling back to a
    pseudo-inverse when ``a`` lacks full column rank.
    """
    a = np.asarray(a)
    y = np.asarray(y)
    if a.ndim != 2 or a.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: a is {a.shape}, y has length {y.shape[0]}")
    if a.shape[1] > a.shape[0]:
        raise RankDeficientError(a.shape[0], "more unknowns than equations")
    q, r, independent = qr_rank_profile(a, rtol)
    if not independent.all():
        raise RankDeficientError(int(np.flatnonzero(~independent)[0]))
    return scipy.linalg.solve_triangular(r, q.conj().T @ y, lower=False)


def principal_svd(h):
    """Largest singular triple ``(u, sigma, v)`` with ``u^H h v = sigma``.

    Phase convention: the first nonzero entry of ``v`` is real and
    nonnegative. A zero matrix returns ``sigma = 0`` with ``u = e_1``,
    ``v = e_1``.
    """
    h = np.asarray(h, dtype=complex)
    rows, cols = h.shape
    if not np.any(h):
        u = np.zeros(rows, dtype=complex)
        v = np.zeros(cols, dtype=complex)
        u[0] = v[0] = 1.0
        return u, 0.0, v
    uu, s, vh = np.linalg.svd(h)
    u = uu[:, 0]
    v = vh[0].conj()
    nz = np.flatnonzero(np.abs(v) > 1e-15 * np.abs(v).max())[0]
    ph = v[nz] / abs(v[nz])
    return u * ph.conjugate(), float(s[0]), v * ph.conjugate()


def bessel_j0(x):
    """Zeroth-order Bessel function of the first kind."""
    return float(scipy.special.j0(x))


def hard_threshold(v, l):
    """Keep the ``l`` largest-magnitude entries of ``v`` in place; zero the rest.

    Ties at the threshold are broken in favour of the lowest index.
    """
    v = np.asarray(v)
    out = np.zeros_like(v)
    keep = kernels.top_k(np.abs(v).astype(np.float64), int(l))
    out[keep] = v[keep]
    return out


def wrap_angle(x):
    """Map angles into ``[0, 2*pi)``."""
    w = np.mod(x, 2 * np.pi)
    return np.where(w >= 2 * np.pi, 0.0, w)


def wrapped_difference(a, b):
    """Signed angular difference ``a - b`` folded into ``[-pi, pi)``."""
    return np.mod(np.asarray(a) - np.asarray(b) + np.pi, 2 * np.pi) - np.pi
