# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.  See ``_pykernels`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, pow, sqrt, INFINITY, fabs

cnp.import_array()

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_ITERATION_CAP = 2


def simplex_pivot(double[:, ::1] T, cnp.intp_t[::1] basis, Py_ssize_t ncols,
                  double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t w = T.shape[1]
    cdef Py_ssize_t it = 0, i, j, r, c
    cdef double rmin, ratio, f, piv
    cdef Py_ssize_t best_row
    while it < max_iter:
        j = -1
        for c in range(ncols):
            if T[m, c] < -tol:
                j = c
                break
        if j < 0:
            return STATUS_OPTIMAL, it
        rmin = INFINITY
        for r in range(m):
            if T[r, j] > tol:
                ratio = T[r, w - 1] / T[r, j]
                if ratio < rmin:
                    rmin = ratio
        if rmin == INFINITY:
            return STATUS_UNBOUNDED, it
        best_row = -1
        for r in range(m):
            if T[r, j] > tol:
                ratio = T[r, w - 1] / T[r, j]
                if ratio <= rmin + tol * (fabs(rmin) if fabs(rmin) > 1.0 else 1.0):
                    if best_row < 0 or basis[r] < basis[best_row]:
                        best_row = r
        i = best_row
        piv = T[i, j]
        for c in range(w):
            T[i, c] /= piv
        for r in range(m + 1):
            if r != i:
                f = T[r, j]
                if f != 0.0:
                    for c in range(w):
                        T[r, c] -= f * T[i, c]
        basis[i] = j
        it += 1
    return STATUS_ITERATION_CAP, it


cdef inline double _u(int code, double alpha, double X) nogil:
    if code == 0:
        if X <= 0.0:
            return -INFINITY
        return log(X)
    if X <= 0.0:
        if alpha > 0.0:
            return 0.0
        return -INFINITY
    return pow(X, alpha) / alpha


cdef inline double _du(int code, double alpha, double X) nogil:
    if code == 0:
        return 1.0 / X
    return pow(X, alpha - 1.0)


def eu_supergradient(const double[:, ::1] B, const double[:, ::1] P, int code, double alpha,
                     double x, w0, double a, double b, Py_ssize_t max_iter):
    cdef Py_ssize_t L = B.shape[0], r = B.shape[1], m = P.shape[0]
    cdef double[::1] w = np.array(w0, dtype=np.float64)
    cdef double[::1] best_w = np.array(w0, dtype=np.float64)
    cdef double[::1] X = np.empty(L)
    cdef double[::1] Ut = np.empty(L)
    cdef double[::1] g = np.empty(r)
    cdef double[::1] trial = np.empty(r)
    cdef double best = -INFINITY, val, vmin, gn, step, s
    cdef Py_ssize_t k, i, j, l, istar, it = 0, halv
    cdef bint ok
    for k in range(max_iter):
        it = k + 1
        for l in range(L):
            s = x
            for j in range(r):
                s += B[l, j] * w[j]
            X[l] = s
            Ut[l] = _u(code, alpha, s)
        vmin = INFINITY
        istar = 0
        for i in range(m):
            val = 0.0
            for l in range(L):
                if P[i, l] != 0.0:
                    val += P[i, l] * Ut[l]
            if val < vmin:
                vmin = val
                istar = i
        if vmin > best:
            best = vmin
            for j in range(r):
                best_w[j] = w[j]
        gn = 0.0
        for j in range(r):
            s = 0.0
            for l in range(L):
                s += B[l, j] * P[istar, l] * _du(code, alpha, X[l])
            g[j] = s
            gn += s * s
        gn = sqrt(gn)
        if gn == 0.0:
            break
        step = a / (k + b)
        ok = False
        for halv in range(60):
            for j in range(r):
                trial[j] = w[j] + step * g[j] / gn
            ok = True
            for l in range(L):
                s = x
                for j in range(r):
                    s += B[l, j] * trial[j]
                if not (s > 0.0):
                    ok = False
                    break
            if ok:
                break
            step *= 0.5
        if not ok:
            break
        for j in range(r):
            w[j] = trial[j]
    return np.asarray(best_w), best, it


def grid_scan(const double[:, ::1] Gn, const double[:, ::1] Gl, const double[:, ::1] P, int code,
              double alpha, double x, lo, hi, npts):
    cdef Py_ssize_t n = Gn.shape[1], N = Gn.shape[0], L = Gl.shape[0], m = P.shape[0]
    cdef double[::1] lo_ = np.array(lo, dtype=np.float64)
    cdef double[::1] hi_ = np.array(hi, dtype=np.float64)
    cdef cnp.int64_t[::1] np_ = np.array(npts, dtype=np.int64)
    cdef cnp.int64_t[::1] idx = np.zeros(n, dtype=np.int64)
    cdef double[::1] h = np.empty(n)
    cdef double[::1] best_h = np.full(n, np.nan)
    cdef double[::1] Ut = np.empty(L)
    cdef double best = -INFINITY, s, val, vmin
    cdef Py_ssize_t count = 0, k, j, l, i
    cdef bint ok, done = False
    if n == 0:
        return np.asarray(best_h), best, 0
    while not done:
        for k in range(n):
            if np_[k] > 1:
                h[k] = lo_[k] + (hi_[k] - lo_[k]) * idx[k] / (np_[k] - 1)
            else:
                h[k] = lo_[k]
        ok = True
        for j in range(N):
            s = x
            for k in range(n):
                s += Gn[j, k] * h[k]
            if s < -1e-12:
                ok = False
                break
        if ok:
            count += 1
            for l in range(L):
                s = x
                for k in range(n):
                    s += Gl[l, k] * h[k]
                if s < 0.0:
                    s = 0.0
                Ut[l] = _u(code, alpha, s)
            vmin = INFINITY
            for i in range(m):
                val = 0.0
                for l in range(L):
                    if P[i, l] != 0.0:
                        val += P[i, l] * Ut[l]
                if val < vmin:
                    vmin = val
            if vmin > best:
                best = vmin
                for k in range(n):
                    best_h[k] = h[k]
        # mixed-radix increment, last coordinate fastest
        k = n - 1
        while True:
            idx[k] += 1
            if idx[k] < np_[k]:
                break
            idx[k] = 0
            if k == 0:
                done = True
                break
            k -= 1
    return np.asarray(best_h), best, count
