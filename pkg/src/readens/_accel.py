"""Backend switch for the hot kernels.

numba is used when importable unless ``READENS_DISABLE_NUMBA`` is set to a
truthy value, in which case the pure-numpy implementations are selected.
The flag is read once at import time.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("READENS_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG not in ("", "0", "false", "no")

try:
    if DISABLED_BY_ENV:
        raise ImportError("disabled by READENS_DISABLE_NUMBA")
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def njit(func):
    """``numba.njit(cache=True)`` or ``None`` when numba is unavailable."""
    if _njit is None:
        return None
    return _njit(cache=True)(func)
