"""Kernel backend selection.

The compiled Cython extension is preferred; the numpy fallback is used when
it is missing or when the FA_PURE_KERNELS=1 environment variable forces it.
Both backends implement the same contracts with bit-identical results;
``BACKEND`` records which one is active.
"""

import os

import numpy as np

from . import _fast_py

if os.environ.get("FA_PURE_KERNELS") == "1":
    _impl = _fast_py
    BACKEND = "pure"
else:
    try:
        from . import _fast as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _fast_py
        BACKEND = "pure"


def compose_frame(height, width, band_top, band_bot, bg, tissue, emission):
    """Noise-free frame field (float64 H x W x 3); see _fast_py for details."""
    bg = np.ascontiguousarray(bg, dtype=np.float64)
    tissue = np.ascontiguousarray(tissue, dtype=np.float64)
    emission = np.ascontiguousarray(emission, dtype=np.float64)
    return _impl.compose_frame(int(height), int(width), int(band_top), int(band_bot),
                               bg, tissue, emission)


def search_confusions(r10, p10, a10, f10, n_max, total=None, positives=None):
    """Confusion quadruples whose metrics round to the given targets.

    Targets are integers in tenths of a percent (68.8% -> 688). Returns an
    int64 array of (tp, fp, fn, tn) rows sorted by (total, tp, fp, fn).
    """
    arr = _impl.search_confusions(
        int(r10), int(p10), int(a10), int(f10), int(n_max),
        -1 if total is None else int(total),
        -1 if positives is None else int(positives),
    )
    if arr.shape[0] > 1:
        totals = arr.sum(axis=1)
        order = np.lexsort((arr[:, 2], arr[:, 1], arr[:, 0], totals))
        arr = arr[order]
    return arr
