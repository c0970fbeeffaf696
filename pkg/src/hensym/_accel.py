"""
Numba shim.

Set ``HENSYM_NUMBA=0`` to force the pure-numpy kernels (also used automatically
when numba cannot be imported).
"""
import os
import warnings

_requested = os.environ.get("HENSYM_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

try:
    if not _requested:
        raise ImportError("disabled by HENSYM_NUMBA")
    from numba import njit
    NUMBA_ENABLED = True
except ImportError as exc:
    if _requested:
        warnings.warn(f"numba unavailable ({exc}); using numpy kernels")
    NUMBA_ENABLED = False

    def njit(*args, **kw):
        if len(args) == 1 and callable(args[0]) and not kw:
            return args[0]
        return lambda f: f


def jit_options():
    return dict(cache=True, nogil=True)
