"""Numba switch.

Set ``VARGROUND_NUMBA=0`` in the environment before import to run every hot
kernel through its pure-numpy fallback instead.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("VARGROUND_NUMBA", "1").lower() not in (
    "0",
    "false",
    "no",
    "off",
)


def njit(*args, **kwargs):
    """``numba.njit`` with caching on, or a no-op decorator when numba is off."""
    bare = len(args) == 1 and callable(args[0]) and not kwargs
    if not NUMBA_AVAILABLE:
        return args[0] if bare else (lambda f: f)
    kwargs.setdefault("cache", True)
    if bare:
        return numba.njit(**kwargs)(args[0])
    return numba.njit(*args, **kwargs)


def select(fast, slow):
    """Pick the compiled kernel or its numpy twin according to ``USE_NUMBA``."""
    return fast if USE_NUMBA else slow
