"""Selection between numba-compiled kernels and the plain-Python fallback.

Setting the environment variable ``FINITEDECOY_DISABLE_JIT=1`` (or running
without numba installed) makes :func:`njit` the identity decorator, so every
kernel runs through the interpreter with ``math`` and ``numpy`` only.  The
flag is read once at import time.
"""

from __future__ import annotations

import os

_FLAG = "FINITEDECOY_DISABLE_JIT"


def _flag_set() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() not in ("", "0", "false", "no")


JIT_ENABLED = False
if not _flag_set():
    try:
        import numba

        JIT_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        JIT_ENABLED = False


def njit(func):
    """Compile ``func`` in nopython mode when the JIT path is active."""
    if JIT_ENABLED:
        return numba.njit(cache=True, nogil=True)(func)
    return func
