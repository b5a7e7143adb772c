"""Pure numpy matched-filter grid search (fallback for the compiled kernel)."""
import numpy as np

# elements of the (rows, looks, grid) angle block evaluated at once
_BLOCK = 1 << 21


def mf_search(phi_re, phi_im, times, lo, step, G, start, scale, sine):
    times = np.asarray(times, dtype=np.float64)
    L, K = times.shape
    start = np.asarray(start, dtype=np.int64)
    out_idx = np.empty(L, dtype=np.int64)
    out_score = np.empty(L, dtype=np.float64)
    offsets = np.arange(G, dtype=np.float64)
    rows = max(1, _BLOCK // max(1, K * G))
    for a in range(0, L, rows):
        b = min(L, a + rows)
        v = lo + step * (start[a:b, None] + offsets[None, :])
        ang = (scale * times[a:b, :, None]) * v[:, None, :]
        s = np.sin(ang)
        pr = phi_re[a:b, :, None]
        if sine:
            score = 2.0 * np.abs((pr * s).sum(axis=1)) - (s * s).sum(axis=1)
        else:
            c = np.cos(ang)
            pi = phi_im[a:b, :, None]
            re = (pr * c + pi * s).sum(axis=1)
            im = (pi * c - pr * s).sum(axis=1)
            score = re * re + im * im
        best = score.argmax(axis=1)
        out_idx[a:b] = start[a:b] + best
        out_score[a:b] = score[np.arange(b - a), best]
    return out_idx, out_score
