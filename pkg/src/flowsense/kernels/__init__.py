"""Compiled hot loops (numba by default, pure numpy via FLOWSENSE_NUMBA=0)."""

from ..backend import NUMBA_ENABLED, backend_name  # noqa: F401
