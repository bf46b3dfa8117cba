"""Pure-numpy implementations of the hot kernels.

Selected automatically when the compiled extension is unavailable (or when
FA_PURE_KERNELS=1). Results are bit-identical to the compiled versions:
frame composition uses the same multiply/add ordering and the confusion
search is exact integer arithmetic.
"""

import numpy as np


def compose_frame(height, width, band_top, band_bot, bg, tissue, emission):
    """Render the noise-free frame field as float64 H x W x 3.

    Rows outside [band_top, band_bot) take the background colour; rows
    inside take the tissue colour with `emission` (8-bit units, indexed by
    column) added to the green channel.
    """
    out = np.empty((height, width, 3), dtype=np.float64)
    out[:, :, 0] = bg[0]
    out[:, :, 1] = bg[1]
    out[:, :, 2] = bg[2]
    out[band_top:band_bot, :, 0] = tissue[0]
    out[band_top:band_bot, :, 1] = tissue[1] + emission[np.newaxis, :]
    out[band_top:band_bot, :, 2] = tissue[2]
    return out


def _round_window(num, den, target10):
    """True where num/den (as a percentage) rounds half-up to target10/10.

    num, den are integer arrays; the comparison is exact:
    target - 0.05 <= 100*num/den < target + 0.05.
    """
    lhs = 2000 * num
    return ((2 * target10 - 1) * den <= lhs) & (lhs < (2 * target10 + 1) * den)


def search_confusions(r10, p10, a10, f10, n_max, total, positives):
    """All (tp, fp, fn, tn) with total <= n_max whose four metrics round to
    the given tenth-of-a-percent targets.

    total / positives of -1 mean unconstrained; otherwise they pin
    tp+fp+fn+tn and tp+fn respectively. Row order is unspecified (the
    caller sorts canonically). Exact integer arithmetic throughout.
    """
    found = []
    totals = [total] if total >= 0 else range(1, n_max + 1)
    for n in totals:
        if n < 1 or n > n_max:
            continue
        # accuracy depends only on s = fp + fn: (tp + tn) / n = (n - s) / n
        s_all = np.arange(n + 1, dtype=np.int64)
        s_ok = s_all[_round_window(n - s_all, np.int64(n), a10)]
        for s in s_ok:
            s = int(s)
            # f1 is undefined at tp == 0, so tp >= 1 for all four to match
            tp = np.arange(1, n - s + 1, dtype=np.int64)[:, None]
            if tp.size == 0:
                continue
            fp = np.arange(0, s + 1, dtype=np.int64)[None, :]
            fn = s - fp
            ok = _round_window(tp, tp + fn, r10)
            ok &= _round_window(tp, tp + fp, p10)
            ok &= _round_window(2 * tp, 2 * tp + s, f10)
            if positives >= 0:
                ok &= (tp + fn) == positives
            ti, fi = np.nonzero(ok)
            for i, j in zip(ti.tolist(), fi.tolist()):
                tp_v = i + 1
                fp_v = j
                found.append((tp_v, fp_v, s - fp_v, n - tp_v - s))
    return np.array(found, dtype=np.int64).reshape(-1, 4)
