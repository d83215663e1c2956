"""Pick the compiled propagation kernel when it imports, else numpy.

Set GDL_BACKEND=python to force the fallback.
"""

import os

from . import _propagate

# Above this joint dimension batched LAPACK through numpy wins (see benchmarks/).
COMPILED_MAX_DIM = 8

BACKEND = "python"
_compiled = None

if os.environ.get("GDL_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    else:
        BACKEND = "cython"


def midpoint_batch(H0, V, coeffs, dt, U=None):
    if _compiled is not None and H0.shape[-1] <= COMPILED_MAX_DIM:
        return _compiled.midpoint_batch(H0, V, coeffs, dt, U)
    return _propagate.midpoint_batch(H0, V, coeffs, dt, U)


def worker_count():
    """Worker cap from GDL_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("GDL_THREADS", "1")))
    except ValueError:
        return 1
