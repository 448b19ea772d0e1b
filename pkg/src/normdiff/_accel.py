"""Backend selection for the hot kernels.

Kernels are written once as plain Python over numpy arrays. When numba is
importable and ``NORMDIFF_DISABLE_NUMBA`` is unset (or ``0``), they are
compiled with ``@njit``; otherwise the same source runs interpreted. Both
paths draw from the same ``numpy.random.Generator`` stream, so seeded runs
are bit-identical across backends.
"""
import os

_flag = os.environ.get("NORMDIFF_DISABLE_NUMBA", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    from numba import njit as _njit

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - exercised via the env flag in a subprocess
    _njit = None
    NUMBA_ENABLED = False


def jit(func=None, **options):
    """``numba.njit`` with project defaults, or the identity without numba."""
    opts = {"cache": True, "nogil": True}
    opts.update(options)

    def wrap(f):
        if NUMBA_ENABLED:
            return _njit(**opts)(f)
        return f

    if func is not None:
        return wrap(func)
    return wrap


def backend_name():
    return "numba" if NUMBA_ENABLED else "python"
