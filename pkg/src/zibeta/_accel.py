"""Optional numba acceleration.

Setting ``ZIBETA_DISABLE_NUMBA=1`` (or running without numba installed)
switches every kernel in :mod:`zibeta._kernels` to its numpy path.
"""
import os

_FLAG = os.environ.get("ZIBETA_DISABLE_NUMBA", "").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity decorator otherwise.

    The decorated function is compiled even when ``USE_NUMBA`` is false so
    the benchmark can compare both paths in one process.
    """
    kwargs.setdefault("cache", True)
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    return _numba.njit(*args, **kwargs)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
