"""Pure numpy implementation of the projection root finder.

Mirrors ``_kernels.pyx`` step for step; used when the compiled module is
unavailable or ``HINGEGAP_PURE=1`` is set.
"""

import numpy as np

_SEED = 0x5EED


def select_quick(values, k, rng):
    """k-th smallest (0-based) by randomized quickselect; expected O(n)."""
    while True:
        if values.size <= 8:
            return float(np.sort(values)[k])
        pivot = values[rng.integers(values.size)]
        lt = values[values < pivot]
        if k < lt.size:
            values = lt
            continue
        n_eq = int(np.count_nonzero(values == pivot))
        if k < lt.size + n_eq:
            return float(pivot)
        k -= lt.size + n_eq
        values = values[values > pivot]


def select_mom(values, k):
    """k-th smallest (0-based) by median of medians; worst-case O(n)."""
    while True:
        n = values.size
        if n <= 25:
            return float(np.sort(values)[k])
        n5 = n // 5
        groups = np.sort(values[: 5 * n5].reshape(n5, 5), axis=1)
        pivot = select_mom(groups[:, 2].copy(), n5 // 2)
        lt = values[values < pivot]
        if k < lt.size:
            values = lt
            continue
        n_eq = int(np.count_nonzero(values == pivot))
        if k < lt.size + n_eq:
            return pivot
        k -= lt.size + n_eq
        values = values[values > pivot]


def find_root(lo, hi, inv, lp, up, zp, median="quickselect"):
    """Root of ``f(lam) = sum_i clip(lam * inv_i, lp_i, up_i) - zp``.

    ``lo``/``hi`` are the kinks ``lp/inv`` and ``up/inv``. Returns
    ``(lam, iterations)``; see ``projection.find_root_median`` for the contract.
    """
    rng = np.random.default_rng(_SEED)
    a = float(lo.min())
    b = float(hi.max())
    offset = 0.0
    slope = 0.0
    L_lo, L_hi, L_inv, L_lp, L_up = lo, hi, inv, lp, up
    iterations = 0

    def f(lam):
        return offset + slope * lam + float(np.clip(lam * L_inv, L_lp, L_up).sum()) - zp

    while True:
        # drop coordinates with no kink strictly inside (a, b); rebuild S
        in_lo = (L_lo > a) & (L_lo < b)
        in_hi = (L_hi > a) & (L_hi < b)
        live = in_lo | in_hi
        if not live.all():
            dead = ~live
            d_lo, d_hi = L_lo[dead], L_hi[dead]
            above = d_hi <= a
            below = ~above & (d_lo >= b)
            offset += float(L_up[dead][above].sum()) + float(L_lp[dead][below].sum())
            slope += float(L_inv[dead][~(above | below)].sum())
            L_lo, L_hi, L_inv, L_lp, L_up = (
                L_lo[live], L_hi[live], L_inv[live], L_lp[live], L_up[live])
            in_lo, in_hi = in_lo[live], in_hi[live]
        S = np.concatenate((L_lo[in_lo], L_hi[in_hi], (a, b)))
        if S.size <= 2:
            break
        iterations += 1
        k = (S.size - 1) // 2
        m = select_quick(S, k, rng) if median == "quickselect" else select_mom(S, k)
        fm = f(m)
        if fm == 0.0:
            return m, iterations
        if fm > 0.0:
            b = m
        else:
            a = m
        if not a < b:
            return a, iterations

    fa, fb = f(a), f(b)
    if fb == fa:
        return 0.5 * (a + b), iterations
    lam = (a * fb - b * fa) / (fb - fa)
    return min(max(lam, a), b), iterations
