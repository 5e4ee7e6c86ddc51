"""Numba switch.

Set ``CVBANDIT_DISABLE_NUMBA=1`` before import to run every kernel as plain
Python/numpy. Both paths share one source so results agree to rounding.
"""
import os

ENABLE_NUMBA = os.environ.get("CVBANDIT_DISABLE_NUMBA", "").strip().lower() not in ("1", "true", "yes")
CACHE_NUMBA = os.environ.get("CVBANDIT_NUMBA_CACHE", "1") != "0"

if ENABLE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        ENABLE_NUMBA = False


def njit(func):
    if ENABLE_NUMBA:
        return numba.njit(cache=CACHE_NUMBA)(func)
    return func


def backend():
    return "numba" if ENABLE_NUMBA else "python"
