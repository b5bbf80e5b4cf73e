"""Kernel selection.

The compiled Cython module is used when it is importable; otherwise the
numpy fallback is used. Set ``CUETRACK_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py as python_kernels

compiled_kernels = None
if os.environ.get("CUETRACK_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_kernels
    except ImportError:
        compiled_kernels = None

_active = compiled_kernels if compiled_kernels is not None else python_kernels

BACKEND = "cython" if compiled_kernels is not None else "python"


def solve_square(cost):
    return _active.solve_square(np.ascontiguousarray(cost, dtype=np.float64))


def iou_matrix(a, b):
    return _active.iou_matrix(
        np.ascontiguousarray(np.reshape(a, (-1, 4)), dtype=np.float64),
        np.ascontiguousarray(np.reshape(b, (-1, 4)), dtype=np.float64),
    )
