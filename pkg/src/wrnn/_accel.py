"""
Switch between numba-compiled loops and the pure-numpy path.

Set ``WRNN_DISABLE_NUMBA=1`` before import to run every kernel through numpy
(useful for debugging and for comparing the two paths).
"""

import os

# the installed TBB is too old for numba and only produces a warning when probed
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

_flag = os.environ.get("WRNN_DISABLE_NUMBA", "").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

JIT_ENABLED = HAVE_NUMBA and _flag in ("", "0", "false", "no")


def njit(func=None, **kwargs):
    """``numba.njit(cache=True)`` when numba is present, identity otherwise.

    Compilation happens even when ``JIT_ENABLED`` is false so the benchmark can
    compare both paths in one process; only the dispatch in ``kernels`` honours
    the flag.
    """
    if not HAVE_NUMBA:
        if func is not None:
            return func
        return lambda f: f
    kwargs.setdefault("cache", True)
    if func is not None:
        return numba.njit(**kwargs)(func)
    return numba.njit(**kwargs)


def set_threads(n):
    if HAVE_NUMBA and n and n > 0:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
