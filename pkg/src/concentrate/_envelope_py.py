"""Pure-Python lower-envelope sweep, used when the compiled kernel is absent.

Same algorithm and tie-breaking as the compiled version, so both return
bit-identical results.
"""
import numpy as np


def lower_envelope(f, c):
    f = np.ascontiguousarray(f, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    lines, n = f.shape
    if c.shape[0] != 2 * n - 1:
        raise ValueError("kernel table must have length 2*n - 1")
    out = np.empty((lines, n), dtype=np.float64)
    arg = np.empty((lines, n), dtype=np.int64)
    cl = c.tolist()
    off = n - 1
    for r in range(lines):
        fl = f[r].tolist()
        row_out = [0.0] * n
        row_arg = [0] * n
        stack = [(0, n - 1, 0, n - 1)]
        while stack:
            ilo, ihi, jlo, jhi = stack.pop()
            if ilo > ihi:
                continue
            mid = (ilo + ihi) >> 1
            base = mid + off
            best_j = jlo
            best = fl[jlo] + cl[base - jlo]
            for j in range(jlo + 1, jhi + 1):
                v = fl[j] + cl[base - j]
                if v < best:
                    best = v
                    best_j = j
            row_out[mid] = best
            row_arg[mid] = best_j
            stack.append((mid + 1, ihi, best_j, jhi))
            stack.append((ilo, mid - 1, jlo, best_j))
        out[r] = row_out
        arg[r] = row_arg
    return out, arg
