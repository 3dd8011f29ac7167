# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled root finder for the box + one-hyperplane projection.

Same control flow as ``_pykernels.find_root``; selection runs in place on a
scratch buffer rebuilt every halving step.
"""

import numpy as np

cdef unsigned long long _SEED = 0x5EED


cdef inline unsigned long long _xorshift(unsigned long long *state) nogil:
    cdef unsigned long long x = state[0]
    x ^= x << 13
    x ^= x >> 7
    x ^= x << 17
    state[0] = x
    return x


cdef inline void _partition3(double *arr, Py_ssize_t left, Py_ssize_t right, double pivot,
                             Py_ssize_t *lt_out, Py_ssize_t *gt_out) nogil:
    # Dutch-flag partition of arr[left..right]: < pivot | == pivot | > pivot
    cdef Py_ssize_t lt = left, i = left, gt = right
    cdef double t
    while i <= gt:
        if arr[i] < pivot:
            t = arr[lt]; arr[lt] = arr[i]; arr[i] = t
            lt += 1
            i += 1
        elif arr[i] > pivot:
            t = arr[gt]; arr[gt] = arr[i]; arr[i] = t
            gt -= 1
        else:
            i += 1
    lt_out[0] = lt
    gt_out[0] = gt


cdef double _select_quick(double *arr, Py_ssize_t n, Py_ssize_t k,
                          unsigned long long *state) nogil:
    cdef Py_ssize_t left = 0, right = n - 1, lt, gt
    cdef double pivot
    while right > left:
        pivot = arr[left + <Py_ssize_t>(_xorshift(state) % <unsigned long long>(right - left + 1))]
        _partition3(arr, left, right, pivot, &lt, &gt)
        if k < lt:
            right = lt - 1
        elif k > gt:
            left = gt + 1
        else:
            return pivot
    return arr[left]


cdef inline void _insertion_sort(double *arr, Py_ssize_t left, Py_ssize_t right) nogil:
    cdef Py_ssize_t i, j
    cdef double t
    for i in range(left + 1, right + 1):
        t = arr[i]
        j = i - 1
        while j >= left and arr[j] > t:
            arr[j + 1] = arr[j]
            j -= 1
        arr[j + 1] = t


cdef double _select_mom(double *arr, Py_ssize_t left, Py_ssize_t right, Py_ssize_t k) nogil:
    # k is an absolute position inside [left, right]
    cdef Py_ssize_t g, gl, gr, n_groups, lt, gt
    cdef double pivot, t
    while True:
        if right - left < 25:
            _insertion_sort(arr, left, right)
            return arr[k]
        n_groups = 0
        g = left
        while g + 4 <= right:
            gl = g
            gr = g + 4
            _insertion_sort(arr, gl, gr)
            t = arr[left + n_groups]; arr[left + n_groups] = arr[gl + 2]; arr[gl + 2] = t
            n_groups += 1
            g += 5
        pivot = _select_mom(arr, left, left + n_groups - 1, left + (n_groups - 1) // 2)
        _partition3(arr, left, right, pivot, &lt, &gt)
        if k < lt:
            right = lt - 1
        elif k > gt:
            left = gt + 1
        else:
            return pivot


def find_root(const double[::1] lo, const double[::1] hi, const double[::1] inv,
              const double[::1] lp, const double[::1] up, double zp, median="quickselect"):
    """Root of ``sum_i clip(lam * inv_i, lp_i, up_i) - zp``; returns ``(lam, iterations)``."""
    cdef Py_ssize_t n = lo.shape[0]
    cdef bint use_mom = median != "quickselect"
    cdef Py_ssize_t[::1] live = np.arange(n, dtype=np.intp)
    cdef double[::1] S_buf = np.empty(2 * n + 2, dtype=np.float64)
    cdef double *S = &S_buf[0]
    cdef Py_ssize_t n_live = n, n_keep, s, j, i, k
    cdef double a = lo[0], b = hi[0], offset = 0.0, slope = 0.0
    cdef double m, fm, fa, fb, lam, h, x
    cdef bint inside_lo, inside_hi
    cdef int iterations = 0
    cdef bint done = False
    cdef unsigned long long state = _SEED

    with nogil:
        for i in range(n):
            if lo[i] < a:
                a = lo[i]
            if hi[i] > b:
                b = hi[i]
        while True:
            # drop coordinates with no kink strictly inside (a, b); rebuild S
            n_keep = 0
            s = 0
            for j in range(n_live):
                i = live[j]
                inside_lo = lo[i] > a and lo[i] < b
                inside_hi = hi[i] > a and hi[i] < b
                if inside_lo or inside_hi:
                    live[n_keep] = i
                    n_keep += 1
                    if inside_lo:
                        S[s] = lo[i]; s += 1
                    if inside_hi:
                        S[s] = hi[i]; s += 1
                elif hi[i] <= a:
                    offset += up[i]
                elif lo[i] >= b:
                    offset += lp[i]
                else:
                    slope += inv[i]
            n_live = n_keep
            S[s] = a; s += 1
            S[s] = b; s += 1
            if s <= 2:
                break
            iterations += 1
            k = (s - 1) // 2
            if use_mom:
                m = _select_mom(S, 0, s - 1, k)
            else:
                m = _select_quick(S, s, k, &state)
            fm = offset + slope * m - zp
            for j in range(n_live):
                i = live[j]
                x = m * inv[i]
                h = lp[i] if x < lp[i] else (up[i] if x > up[i] else x)
                fm += h
            if fm == 0.0:
                lam = m
                done = True
                break
            if fm > 0.0:
                b = m
            else:
                a = m
            if not a < b:
                lam = a
                done = True
                break

        if not done:
            fa = offset + slope * a - zp
            fb = offset + slope * b - zp
            for j in range(n_live):
                i = live[j]
                x = a * inv[i]
                fa += lp[i] if x < lp[i] else (up[i] if x > up[i] else x)
                x = b * inv[i]
                fb += lp[i] if x < lp[i] else (up[i] if x > up[i] else x)
    if done:
        return lam, iterations
    if fb == fa:
        return 0.5 * (a + b), iterations
    lam = (a * fb - b * fa) / (fb - fa)
    return min(max(lam, a), b), iterations
