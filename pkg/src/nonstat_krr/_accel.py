"""Optional numba acceleration.

Hot kernels are written twice: a numba ``@njit`` version and a pure numpy
version. ``NONSTAT_KRR_NUMBA=0`` (or a missing numba install) selects the
numpy path at import time. Both variants stay importable so that they can
be benchmarked and cross-checked against each other.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None
    HAVE_NUMBA = False

_FLAG = os.environ.get("NONSTAT_KRR_NUMBA", "1").strip().lower()
USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")

JIT_OPTIONS = {"nogil": True, "cache": True}


def jit(fn):
    """Compile ``fn`` with numba when available, else return ``None``."""
    if not HAVE_NUMBA:
        return None
    return numba.njit(**JIT_OPTIONS)(fn)


def pick(numba_fn, numpy_fn):
    return numba_fn if (USE_NUMBA and numba_fn is not None) else numpy_fn
