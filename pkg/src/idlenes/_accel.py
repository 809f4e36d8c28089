"""Backend selection for the numeric kernels.

Set ``IDLENES_DISABLE_NUMBA=1`` to force the pure-numpy code paths even when
numba is installed. The choice is made once, at import time.
"""
import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("IDLENES_DISABLE_NUMBA", "0").lower() not in (
    "1",
    "true",
    "yes",
)


def njit(fn):
    """Compile ``fn`` with numba when available; otherwise return it unchanged."""
    if HAVE_NUMBA:
        return numba.njit(cache=True)(fn)
    return fn


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
