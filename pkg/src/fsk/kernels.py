"""Backend selection for the per-pixel kernels.

The compiled extension is used when it imports; set ``FSK_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

import numpy as np

from . import _pykernels

python_backend = _pykernels
compiled_backend = None

if os.environ.get("FSK_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

_impl = compiled_backend or _pykernels
BACKEND = "cython" if compiled_backend is not None else "python"


def lbp_plane(gray):
    return _impl.lbp_plane(np.ascontiguousarray(gray, dtype=np.uint8))


def hog_cell_histograms(gray, cell, bins):
    return _impl.hog_cell_histograms(np.ascontiguousarray(gray, dtype=np.uint8), cell, bins)
