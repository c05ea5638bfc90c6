"""Hot inner loops with a numba path and a pure-numpy fallback.

The backend is chosen once at import time. Set ``MMTRACK_NUMBA=0`` in the
environment to force the numpy path (numba is also skipped if it fails to
import). Both backends honour the same contracts, so results agree to
floating-point rounding.
"""
import os

from mmtrack.kernels import _numpy

_want_numba = os.environ.get("MMTRACK_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

BACKEND = "numpy"
_impl = _numpy
if _want_numba:
    try:
        from mmtrack.kernels import _numba

        _impl = _numba
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is an optional accelerator
        pass

top_k = _impl.top_k
sparse_residual = _impl.sparse_residual
iht_run = _impl.iht_run

__all__ = ["BACKEND", "top_k", "sparse_residual", "iht_run"]
