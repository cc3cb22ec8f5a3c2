"""Kernel backend selection.

The jitted kernels are used whenever numba imports cleanly; setting the
environment variable ``PBCOX_NUMBA=0`` (or ``false``/``off``/``no``) before
import forces the pure-numpy fallback. ``benchmarks/bench_backends.py``
times the two side by side.
"""

import os

_ENV_VAR = "PBCOX_NUMBA"


def _numba_requested():
    return os.environ.get(_ENV_VAR, "1").strip().lower() not in ("0", "false", "off", "no")


USING_NUMBA = False
if _numba_requested():
    try:
        from . import _kernels_numba as kernels

        USING_NUMBA = True
    except ImportError:
        from . import _kernels_numpy as kernels
else:
    from . import _kernels_numpy as kernels


def backend_name():
    """Name of the active kernel backend: 'numba' or 'numpy'."""
    return "numba" if USING_NUMBA else "numpy"
