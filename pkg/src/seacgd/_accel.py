"""Numba switch for the hot kernels.

Set ``SEACGD_DISABLE_NUMBA=1`` to run every kernel as plain Python over
numpy arrays. Results are the same up to floating-point contraction; only
speed differs.
"""
import os

_FLAG = os.environ.get("SEACGD_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None and not DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when available and enabled, identity otherwise."""
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrapper(func):
        return func

    return wrapper


def backend_name():
    return "numba" if HAVE_NUMBA else "python"
