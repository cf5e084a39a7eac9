"""Numba / pure-numpy backend selection.

Hot kernels (the kinetics integrator and the grid solver) are compiled with
numba by default.  Setting the environment variable ``FLOWSENSE_NUMBA=0``
before import selects the pure-numpy fallback path instead; the fallback is
slower but has no compilation step and no numba dependency at runtime.

``NUMBA_NUM_THREADS`` controls how many threads the compiled grid kernels
use (numba's own knob).
"""

import os
import warnings

_flag = os.environ.get("FLOWSENSE_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "off", "no")

NUMBA_ENABLED = False
if _requested:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a hard dep, but be safe
        warnings.warn("numba not importable; falling back to pure numpy kernels")

if NUMBA_ENABLED:
    from numba import njit, prange
else:
    def njit(*args, **kwargs):
        # identity decorator, usable bare or with options
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap

    prange = range


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
