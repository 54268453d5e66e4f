# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels in ``_kernels_py``.

LAPACK/BLAS come from scipy's Cython bindings, so no extra link step is
needed.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy
from scipy.linalg.cython_lapack cimport dgeqp3, dormqr, dtrtrs, dsyev
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()

BACKEND = "cython"


cdef double _select(double* a, Py_ssize_t n, Py_ssize_t kth) noexcept nogil:
    """Value of rank ``kth`` (0-based, ascending); reorders ``a``."""
    cdef Py_ssize_t lo = 0, hi = n - 1, i, j, mid
    cdef double pivot, t
    while hi > lo:
        mid = lo + (hi - lo) // 2
        # median of three
        if a[mid] < a[lo]:
            t = a[mid]; a[mid] = a[lo]; a[lo] = t
        if a[hi] < a[lo]:
            t = a[hi]; a[hi] = a[lo]; a[lo] = t
        if a[hi] < a[mid]:
            t = a[hi]; a[hi] = a[mid]; a[mid] = t
        pivot = a[mid]
        i = lo
        j = hi
        while i <= j:
            while a[i] < pivot:
                i += 1
            while a[j] > pivot:
                j -= 1
            if i <= j:
                t = a[i]; a[i] = a[j]; a[j] = t
                i += 1
                j -= 1
        if kth <= j:
            hi = j
        elif kth >= i:
            lo = i
        else:
            return a[kth]
    return a[kth]


def top_k(const double[::1] v, Py_ssize_t k):
    cdef Py_ssize_t n = v.shape[0], i, above = 0, need, taken = 0, pos = 0
    if k >= n:
        return np.arange(n, dtype=np.int64)
    cdef double* a = <double*> malloc(n * sizeof(double))
    if a == NULL:
        raise MemoryError()
    cdef double kth
    for i in range(n):
        a[i] = fabs(v[i])
        if not a[i] <= 1.7976931348623157e308:
            free(a)
            raise ValueError("top_k needs a finite vector")
    kth = _select(a, n, n - k)
    free(a)
    for i in range(n):
        if fabs(v[i]) > kth:
            above += 1
    need = k - above
    out = np.empty(k, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    cdef double x
    for i in range(n):
        x = fabs(v[i])
        if x > kth:
            o[pos] = i
            pos += 1
        elif x == kth and taken < need:
            o[pos] = i
            pos += 1
            taken += 1
    return out


def hard_threshold(const double[::1] v, Py_ssize_t k):
    idx = top_k(v, k)
    out = np.zeros(v.shape[0])
    cdef double[::1] o = out
    cdef cnp.int64_t[::1] ix = idx
    cdef Py_ssize_t j
    for j in range(ix.shape[0]):
        o[ix[j]] = v[ix[j]]
    return out, idx


def qr_solve(const double[:, ::1] phi, const double[::1] y,
             const cnp.int64_t[::1] support, double rank_tol):
    """Pivoted-QR least squares on ``phi[:, support]``.

    Returns ``(coef, residual, rank, max|A^T r|, max column norm)``;
    ``coef`` and ``residual`` are ``None`` when the columns are rank
    deficient.
    """
    cdef int m = phi.shape[0], k = support.shape[0], one = 1, info = 0
    cdef int lwork = -1, qlwork, rank = 0, i, j
    cdef double wq, r00, colmax = 0.0, c, g, gmax = 0.0
    cdef double alpha = -1.0, beta = 1.0, zero = 0.0, pone = 1.0
    cdef double[::1] cf
    cdef double[::1] rs
    cdef double* a = <double*> malloc(m * k * sizeof(double))
    cdef double* a0 = <double*> malloc(m * k * sizeof(double))
    cdef double* tau = <double*> malloc(k * sizeof(double))
    cdef double* qty = <double*> malloc(m * sizeof(double))
    cdef double* gv = <double*> malloc(k * sizeof(double))
    cdef int* jpvt = <int*> malloc(k * sizeof(int))
    cdef double* work = NULL
    if a == NULL or a0 == NULL or tau == NULL or qty == NULL or gv == NULL or jpvt == NULL:
        free(a); free(a0); free(tau); free(qty); free(gv); free(jpvt)
        raise MemoryError()
    try:
        for j in range(k):
            jpvt[j] = 0
            c = 0.0
            for i in range(m):
                a[i + j * m] = phi[i, support[j]]
                c += a[i + j * m] * a[i + j * m]
            if c > colmax:
                colmax = c
        memcpy(a0, a, m * k * sizeof(double))
        dgeqp3(&m, &k, a, &m, jpvt, tau, &wq, &lwork, &info)
        lwork = <int> wq
        qlwork = -1
        dormqr(b"L", b"T", &m, &one, &k, a, &m, tau, qty, &m, &wq, &qlwork, &info)
        if <int> wq > lwork:
            lwork = <int> wq
        if lwork < 3 * k + 1:
            lwork = 3 * k + 1
        work = <double*> malloc(lwork * sizeof(double))
        if work == NULL:
            raise MemoryError()
        dgeqp3(&m, &k, a, &m, jpvt, tau, work, &lwork, &info)
        r00 = fabs(a[0])
        if r00 > 0:
            for j in range(k):
                if fabs(a[j + j * m]) > rank_tol * r00:
                    rank += 1
        if rank < k:
            return None, None, rank, 0.0, sqrt(colmax)
        for i in range(m):
            qty[i] = y[i]
        dormqr(b"L", b"T", &m, &one, &k, a, &m, tau, qty, &m, work, &lwork, &info)
        dtrtrs(b"U", b"N", b"N", &k, &one, a, &m, qty, &m, &info)
        coef = np.empty(k)
        resid = np.empty(m)
        cf = coef
        rs = resid
        for j in range(k):
            cf[jpvt[j] - 1] = qty[j]
        for i in range(m):
            rs[i] = y[i]
        dgemv(b"N", &m, &k, &alpha, a0, &m, &cf[0], &one, &beta, &rs[0], &one)
        dgemv(b"T", &m, &k, &pone, a0, &m, &rs[0], &one, &zero, gv, &one)
        for j in range(k):
            g = fabs(gv[j])
            if g > gmax:
                gmax = g
        return coef, resid, rank, gmax, sqrt(colmax)
    finally:
        free(a); free(a0); free(tau); free(qty); free(gv); free(jpvt)
        if work != NULL:
            free(work)


def ric_extremes(const double[:, ::1] gram, int s):
    cdef int n = gram.shape[0], i, j, p, info = 0, lwork = -1
    cdef double wq, dev, best = -1e300, lo_all = 1e300, hi_all = -1e300
    cdef int* c = <int*> malloc(s * sizeof(int))
    cdef int* bestc = <int*> malloc(s * sizeof(int))
    cdef double* sub = <double*> malloc(s * s * sizeof(double))
    cdef double* w = <double*> malloc(s * sizeof(double))
    cdef double* work = NULL
    if c == NULL or bestc == NULL or sub == NULL or w == NULL:
        free(c); free(bestc); free(sub); free(w)
        raise MemoryError()
    try:
        dsyev(b"N", b"U", &s, sub, &s, w, &wq, &lwork, &info)
        lwork = max(<int> wq, 3 * s)
        work = <double*> malloc(lwork * sizeof(double))
        for i in range(s):
            c[i] = i
        while True:
            for j in range(s):
                for i in range(j + 1):
                    sub[i + j * s] = gram[c[i], c[j]]
            dsyev(b"N", b"U", &s, sub, &s, w, work, &lwork, &info)
            dev = w[s - 1] - 1.0
            if 1.0 - w[0] > dev:
                dev = 1.0 - w[0]
            if dev > best:
                best = dev
                for i in range(s):
                    bestc[i] = c[i]
            if w[0] < lo_all:
                lo_all = w[0]
            if w[s - 1] > hi_all:
                hi_all = w[s - 1]
            # next combination in lexicographic order
            p = s - 1
            while p >= 0 and c[p] == n - s + p:
                p -= 1
            if p < 0:
                break
            c[p] += 1
            for i in range(p + 1, s):
                c[i] = c[i - 1] + 1
        support = np.empty(s, dtype=np.int64)
        for i in range(s):
            support[i] = bestc[i]
        return best, support, lo_all, hi_all
    finally:
        free(c); free(bestc); free(sub); free(w)
        if work != NULL:
            free(work)


def admm_sweep(const double[:, ::1] phi, const double[:, ::1] proj,
               const double[::1] y, double[::1] x, double[::1] z, double[::1] u,
               double thresh, double relax, int n_iter):
    cdef int m = phi.shape[0], n = phi.shape[1], one = 1, it, i
    cdef double pone = 1.0, zero = 0.0, xh, w
    cdef double* v = <double*> malloc(n * sizeof(double))
    cdef double* t = <double*> malloc(m * sizeof(double))
    cdef double* pt = <double*> malloc(n * sizeof(double))
    if v == NULL or t == NULL or pt == NULL:
        free(v); free(t); free(pt)
        raise MemoryError()
    with nogil:
        for it in range(n_iter):
            for i in range(n):
                v[i] = z[i] - u[i]
            # C-ordered (m, n) is column-major (n, m): phi @ v == op^T v
            dgemv(b"T", &n, &m, &pone, <double*> &phi[0, 0], &n, v, &one, &zero, t, &one)
            for i in range(m):
                t[i] -= y[i]
            dgemv(b"T", &m, &n, &pone, <double*> &proj[0, 0], &m, t, &one, &zero, pt, &one)
            for i in range(n):
                x[i] = v[i] - pt[i]
                xh = relax * x[i] + (1.0 - relax) * z[i]
                w = xh + u[i]
                if w > thresh:
                    z[i] = w - thresh
                elif w < -thresh:
                    z[i] = w + thresh
                else:
                    z[i] = 0.0
                u[i] += xh - z[i]
    free(v); free(t); free(pt)
