import numpy as np


def adaptive_simpson(fn, lo, hi, tol=1e-10, max_depth=40):
    """Vectorised adaptive Simpson rule.

    Integrates ``fn`` over every interval ``[lo[k], hi[k]]`` at once.  ``fn``
    takes a 1-D array of abscissae of length m and returns an array whose
    leading axis has length m (trailing axes are integrated componentwise).
    Intervals are bisected until the Richardson error estimate drops below
    their share of ``tol``.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float)).ravel()
    hi = np.atleast_1d(np.asarray(hi, dtype=float)).ravel()
    lo, hi = np.broadcast_arrays(lo, hi)
    n = lo.size

    a, b = lo.copy(), hi.copy()
    m = 0.5 * (a + b)
    fa, fm, fb = fn(a), fn(m), fn(b)
    whole = (b - a)[:, None] / 6.0 * _flat(fa + 4.0 * fm + fb)
    out = np.zeros((n,) + fa.shape[1:], dtype=float).reshape(n, -1)
    owner = np.arange(n)
    tols = np.full(n, float(tol))

    for depth in range(max_depth):
        if owner.size == 0:
            break
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = fn(lm), fn(rm)
        left = (m - a)[:, None] / 6.0 * _flat(fa + 4.0 * flm + fm)
        right = (b - m)[:, None] / 6.0 * _flat(fm + 4.0 * frm + fb)
        err = left + right - whole
        done = np.max(np.abs(err), axis=1) <= 15.0 * tols
        if depth == max_depth - 1:
            done[:] = True
        np.add.at(out, owner[done], (left + right + err / 15.0)[done])
        keep = ~done
        if not keep.any():
            owner = owner[:0]
            break
        owner = np.concatenate([owner[keep], owner[keep]])
        tols = np.concatenate([tols[keep], tols[keep]]) / 2.0
        a, b, m = (
            np.concatenate([a[keep], m[keep]]),
            np.concatenate([m[keep], b[keep]]),
            np.concatenate([lm[keep], rm[keep]]),
        )
        fa, fb, fm = (
            np.concatenate([fa[keep], fm[keep]]),
            np.concatenate([fm[keep], fb[keep]]),
            np.concatenate([flm[keep], frm[keep]]),
        )
        whole = np.concatenate([left[keep], right[keep]])

    return out.reshape((n,) + fa.shape[1:])


def _flat(arr):
    return arr.reshape(arr.shape[0], -1)
