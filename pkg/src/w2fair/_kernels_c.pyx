# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled grid kernels; see ``_kernels_py`` for the contract."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow

cnp.import_array()

MODE_W2 = 0
MODE_W2_COARSE = 1
MODE_W1 = 2


cdef inline Py_ssize_t _search_left(const double[::1] a, Py_ssize_t n, double x) noexcept nogil:
    # first index with a[i] >= x
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline Py_ssize_t _search_right(const double[::1] a, Py_ssize_t n, double x) noexcept nogil:
    # first index with a[i] > x
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline Py_ssize_t _bin(const double[::1] eta, Py_ssize_t J, double v) noexcept nogil:
    cdef Py_ssize_t j = _search_right(eta, J + 1, v)
    if j < 1:
        return 1
    if j > J:
        return J
    return j


cdef inline double _interp(const double[::1] eta, const double[::1] levels, Py_ssize_t J, double v) noexcept nogil:
    cdef Py_ssize_t j = _bin(eta, J, v)
    cdef double t = (v - eta[j - 1]) / (eta[j] - eta[j - 1])
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return levels[j - 1] + t * (levels[j] - levels[j - 1])


cdef inline double _inverse(const double[::1] eta, const double[::1] levels, Py_ssize_t J, double tau) noexcept nogil:
    cdef Py_ssize_t k
    if tau < levels[0]:
        tau = levels[0]
    elif tau > levels[J]:
        tau = levels[J]
    k = _search_left(levels, J + 1, tau)
    if k == 0:
        return eta[0]
    return eta[k - 1] + (tau - levels[k - 1]) / (levels[k] - levels[k - 1]) * (eta[k] - eta[k - 1])


cdef inline Py_ssize_t _nearest(const double[::1] levels, Py_ssize_t J, double target, Py_ssize_t hint) noexcept nogil:
    cdef Py_ssize_t pos = _search_left(levels, J + 1, target)
    cdef double best
    cdef Py_ssize_t first, last
    if pos == 0:
        best = levels[0]
    elif pos > J:
        best = levels[J]
    elif levels[pos] - target <= target - levels[pos - 1]:
        best = levels[pos]
    else:
        best = levels[pos - 1]
    first = _search_left(levels, J + 1, best)
    last = _search_right(levels, J + 1, best) - 1
    if hint < first:
        return first
    if hint > last:
        return last
    return hint


def cdf_counts(scores, const double[::1] eta):
    # histogram then prefix sum; the bin is guessed from a uniform spacing and
    # corrected against the knots, so any increasing grid stays exact
    cdef const double[::1] v = np.ascontiguousarray(scores, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], m = eta.shape[0], i, j
    cdef double x, lo = eta[0], scale = (m - 1) / (eta[m - 1] - eta[0])
    out = np.zeros(m, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = out
    with nogil:
        for i in range(n):
            x = v[i]
            if x != x:
                continue
            if x < lo:
                j = 0
            else:
                x = (x - lo) * scale
                j = <Py_ssize_t>x + 1 if x < m else m
                x = v[i]
            while j > 0 and eta[j - 1] > x:
                j -= 1
            while j < m and eta[j] <= x:
                j += 1
            if j < m:
                counts[j] += 1
        for j in range(1, m):
            counts[j] += counts[j - 1]
    return out


def locate_bins(const double[::1] eta, values):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], J = eta.shape[0] - 1, i, j
    idx_arr = np.empty(n, dtype=np.int64)
    clamped_arr = np.zeros(n, dtype=np.bool_)
    cdef cnp.int64_t[::1] idx = idx_arr
    cdef cnp.npy_bool[::1] clamped = clamped_arr
    with nogil:
        for i in range(n):
            j = _search_right(eta, J + 1, v[i])
            if j < 1:
                j = 1
                clamped[i] = 1
            elif j > J:
                j = J
                clamped[i] = 1
            idx[i] = j
    return idx_arr, clamped_arr


def interp_levels(const double[::1] eta, const double[::1] levels, values):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], J = eta.shape[0] - 1, i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            out[i] = _interp(eta, levels, J, v[i])
    return out_arr


def inverse_levels(const double[::1] eta, const double[::1] levels, taus):
    cdef const double[::1] t = np.ascontiguousarray(taus, dtype=np.float64)
    cdef Py_ssize_t n = t.shape[0], J = eta.shape[0] - 1, i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            out[i] = _inverse(eta, levels, J, t[i])
    return out_arr


def quantile_distance(const double[::1] eta, const double[::1] levels0, const double[::1] levels1, double p):
    cdef Py_ssize_t J = eta.shape[0] - 1, k
    cdef double total = 0.0, tau, d
    with nogil:
        for k in range(J):
            tau = (k + 0.5) / J
            d = fabs(_inverse(eta, levels0, J, tau) - _inverse(eta, levels1, J, tau))
            if p == 2.0:
                total += d * d
            elif p == 1.0:
                total += d
            else:
                total += pow(d, p)
    return total / J


def nearest_level_index(const double[::1] levels, targets, hints):
    cdef const double[::1] t = np.ascontiguousarray(targets, dtype=np.float64)
    cdef const cnp.int64_t[::1] h = np.ascontiguousarray(hints, dtype=np.int64)
    cdef Py_ssize_t n = t.shape[0], J = levels.shape[0] - 1, i
    out_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    with nogil:
        for i in range(n):
            out[i] = _nearest(levels, J, t[i], h[i])
    return out_arr


def transport_terms(const double[::1] eta, const cnp.int64_t[::1] own_counts, Py_ssize_t n_own,
                    const double[::1] other_levels, values, int mode):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], J = eta.shape[0] - 1, i, j, up, partner
    own_arr = np.asarray(own_counts, dtype=np.float64) / n_own
    cdef const double[::1] own_levels = own_arr
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double mass, num, h
    with nogil:
        for i in range(n):
            j = _bin(eta, J, v[i])
            up = j + 1 if j < J else J
            mass = <double>(own_counts[up] - own_counts[up - 1])
            if mass < 1.0:
                mass = 1.0
            if mode == 0:
                h = _interp(eta, own_levels, J, v[i])
                num = v[i] - _inverse(eta, other_levels, J, h)
            else:
                partner = _nearest(other_levels, J, own_levels[j], j)
                num = eta[j] - eta[partner]
                if mode == 2:
                    if num > 0.0:
                        num = 1.0
                    elif num < 0.0:
                        num = -1.0
            out[i] = num / mass
    return out_arr
