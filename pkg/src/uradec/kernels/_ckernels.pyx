# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled message-passing kernels; same interface as _pykernels."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.string cimport memset, memcpy

cnp.import_array()

NAME = "cython"

ctypedef cnp.int64_t i64


cdef inline void _wht(double* v, Py_ssize_t Q) noexcept nogil:
    cdef Py_ssize_t h, i, j
    cdef double a, b, c, d
    cdef double* p
    cdef double* q
    if Q < 4:
        if Q == 2:
            a = v[0]
            v[0] = a + v[1]
            v[1] = a - v[1]
        return
    # first two stages fused as a radix-4 butterfly
    i = 0
    while i < Q:
        a = v[i] + v[i + 1]
        b = v[i] - v[i + 1]
        c = v[i + 2] + v[i + 3]
        d = v[i + 2] - v[i + 3]
        v[i] = a + c
        v[i + 1] = b + d
        v[i + 2] = a - c
        v[i + 3] = b - d
        i += 4
    h = 4
    while h < Q:
        i = 0
        while i < Q:
            p = v + i
            q = p + h
            for j in range(h):
                a = p[j]
                b = q[j]
                p[j] = a + b
                q[j] = a - b
            i += 2 * h
        h *= 2


cdef inline void _conv(const double* u, const double* v, double* out, Py_ssize_t Q) noexcept nogil:
    cdef Py_ssize_t x, y
    cdef double ux
    memset(out, 0, Q * sizeof(double))
    for x in range(Q):
        ux = u[x]
        if ux == 0.0:
            continue
        for y in range(Q):
            out[x ^ y] += ux * v[y]


cdef inline void _normalize(double* x, Py_ssize_t Q) noexcept nogil:
    cdef Py_ssize_t a
    cdef double s = 0.0
    for a in range(Q):
        s += x[a]
    if s > 0.0 and s < 1e308:
        s = 1.0 / s
        for a in range(Q):
            x[a] *= s
    else:
        for a in range(Q):
            x[a] = 1.0 / Q


cdef inline void _finish(double* x, Py_ssize_t Q, double floor) noexcept nogil:
    cdef Py_ssize_t a
    cdef double s = 0.0
    _normalize(x, Q)
    for a in range(Q):
        if x[a] < floor:
            x[a] = floor
        s += x[a]
    s = 1.0 / s
    for a in range(Q):
        x[a] *= s


def wht(v):
    a = np.array(v, dtype=np.float64, copy=True)
    shape = a.shape
    cdef Py_ssize_t Q = shape[len(shape) - 1] if len(shape) else 0
    if Q < 1 or Q & (Q - 1):
        raise ValueError("length must be a power of two")
    a = np.ascontiguousarray(a.reshape(-1, Q))
    cdef double[:, ::1] arr = a
    cdef Py_ssize_t r
    for r in range(arr.shape[0]):
        _wht(&arr[r, 0], Q)
    return a.reshape(shape)


def xor_conv(u, v):
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    out = np.empty(uu.shape[0])
    cdef double[::1] oo = out
    _conv(&uu[0], &vv[0], &oo[0], uu.shape[0])
    return out


cdef void _check_phase(const double* v2c, double* out, const i64* check_ptr, Py_ssize_t P,
                       const i64* perm, const i64* invperm, Py_ssize_t Q, bint use_wht,
                       double* y, double* pre, double* suf, double* s) noexcept nogil:
    cdef Py_ssize_t j, lo, hi, d, i, a, e
    cdef double* m
    cdef double invq = 1.0 / Q
    for j in range(P):
        lo = check_ptr[j]
        hi = check_ptr[j + 1]
        d = hi - lo
        if d == 0:
            continue
        for i in range(d):
            e = lo + i
            for a in range(Q):
                y[i * Q + a] = v2c[e * Q + invperm[e * Q + a]]
        if use_wht:
            for i in range(d):
                _wht(&y[i * Q], Q)
            for a in range(Q):
                pre[a] = 1.0
                suf[d * Q + a] = 1.0
            for i in range(d):
                for a in range(Q):
                    pre[(i + 1) * Q + a] = pre[i * Q + a] * y[i * Q + a]
            for i in range(d - 1, -1, -1):
                for a in range(Q):
                    suf[i * Q + a] = suf[(i + 1) * Q + a] * y[i * Q + a]
            for i in range(d):
                for a in range(Q):
                    s[a] = pre[i * Q + a] * suf[(i + 1) * Q + a]
                _wht(s, Q)
                e = lo + i
                m = &out[e * Q]
                for a in range(Q):
                    m[a] = s[perm[e * Q + a]] * invq
                    if m[a] < 0.0:
                        m[a] = 0.0
                _normalize(m, Q)
        else:
            # pre[i]: conv of y[0..i-1]; suf[i]: conv of y[i..d-1]; delta at both ends
            memset(pre, 0, Q * sizeof(double))
            pre[0] = 1.0
            memset(&suf[d * Q], 0, Q * sizeof(double))
            suf[d * Q] = 1.0
            if d > 1:
                memcpy(&pre[Q], y, Q * sizeof(double))
                for i in range(2, d):
                    _conv(&pre[(i - 1) * Q], &y[(i - 1) * Q], &pre[i * Q], Q)
                memcpy(&suf[(d - 1) * Q], &y[(d - 1) * Q], Q * sizeof(double))
                for i in range(d - 2, 0, -1):
                    _conv(&y[i * Q], &suf[(i + 1) * Q], &suf[i * Q], Q)
            for i in range(d):
                e = lo + i
                if i == 0:
                    memcpy(s, &suf[Q], Q * sizeof(double))
                elif i == d - 1:
                    memcpy(s, &pre[i * Q], Q * sizeof(double))
                else:
                    _conv(&pre[i * Q], &suf[(i + 1) * Q], s, Q)
                m = &out[e * Q]
                for a in range(Q):
                    m[a] = s[perm[e * Q + a]]
                _normalize(m, Q)


cdef void _var_phase(const double* lam, const double* c2v, double* v2c, double* marg,
                     const i64* var_ptr, const i64* var_edges, Py_ssize_t L, Py_ssize_t Q,
                     double floor, double* pre, double* suf) noexcept nogil:
    cdef Py_ssize_t l, lo, w, i, a, e
    cdef double* m
    for l in range(L):
        lo = var_ptr[l]
        w = var_ptr[l + 1] - lo
        for a in range(Q):
            pre[a] = lam[l * Q + a]
        for i in range(w):
            e = var_edges[lo + i]
            for a in range(Q):
                pre[(i + 1) * Q + a] = pre[i * Q + a] * c2v[e * Q + a]
        m = &marg[l * Q]
        memcpy(m, &pre[w * Q], Q * sizeof(double))
        _finish(m, Q, floor)
        for a in range(Q):
            suf[a] = 1.0
        for i in range(w - 1, -1, -1):
            e = var_edges[lo + i]
            m = &v2c[e * Q]
            for a in range(Q):
                m[a] = pre[i * Q + a] * suf[a]
            _finish(m, Q, floor)
            for a in range(Q):
                suf[a] *= c2v[e * Q + a]


cdef Py_ssize_t _max_degree(const i64[::1] ptr):
    cdef Py_ssize_t j, dmax = 0
    for j in range(ptr.shape[0] - 1):
        if ptr[j + 1] - ptr[j] > dmax:
            dmax = ptr[j + 1] - ptr[j]
    return dmax


def check_phase(const double[:, ::1] v2c, const i64[::1] check_ptr, const i64[:, ::1] perm,
                const i64[:, ::1] invperm, bint use_wht):
    cdef Py_ssize_t E = v2c.shape[0], Q = v2c.shape[1]
    out_arr = np.empty((E, Q))
    if E == 0:
        return out_arr
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t dmax = _max_degree(check_ptr)
    cdef double* y = <double*> malloc(dmax * Q * sizeof(double))
    cdef double* pre = <double*> malloc((dmax + 1) * Q * sizeof(double))
    cdef double* suf = <double*> malloc((dmax + 1) * Q * sizeof(double))
    cdef double* s = <double*> malloc(Q * sizeof(double))
    try:
        with nogil:
            _check_phase(&v2c[0, 0], &out[0, 0], &check_ptr[0], check_ptr.shape[0] - 1,
                         &perm[0, 0], &invperm[0, 0], Q, use_wht, y, pre, suf, s)
    finally:
        free(y)
        free(pre)
        free(suf)
        free(s)
    return out_arr


def var_phase(const double[:, ::1] lam, const double[:, ::1] c2v, const i64[::1] var_ptr,
              const i64[::1] var_edges, double floor):
    cdef Py_ssize_t L = lam.shape[0], Q = lam.shape[1], E = c2v.shape[0]
    v2c_arr = np.empty((E, Q))
    marg_arr = np.empty((L, Q))
    # empty edge sets are fine: pointers into zero-size buffers are never read
    cdef double[:, ::1] v2c = np.empty((max(E, 1), Q)) if E == 0 else v2c_arr
    cdef double[:, ::1] marg = marg_arr
    cdef const double* c2p = &c2v[0, 0] if E else NULL
    cdef Py_ssize_t wmax = _max_degree(var_ptr)
    cdef double* pre = <double*> malloc((wmax + 1) * Q * sizeof(double))
    cdef double* suf = <double*> malloc(Q * sizeof(double))
    try:
        with nogil:
            _var_phase(&lam[0, 0], c2p, &v2c[0, 0], &marg[0, 0], &var_ptr[0],
                       &var_edges[0] if E else NULL, L, Q, floor, pre, suf)
    finally:
        free(pre)
        free(suf)
    return v2c_arr, marg_arr


def bp_loop(const double[:, ::1] lam, const i64[::1] check_ptr, const i64[:, ::1] perm,
            const i64[:, ::1] invperm, const i64[::1] var_ptr, const i64[::1] var_edges,
            const i64[::1] edge_var, bint use_wht, double floor, int max_iters, bint early_exit):
    """Full flooding loop; returns (marginals, hard, iterations, syndrome_zero)."""
    cdef Py_ssize_t L = lam.shape[0], Q = lam.shape[1], E = perm.shape[0]
    cdef Py_ssize_t P = check_ptr.shape[0] - 1
    cdef Py_ssize_t dmax = _max_degree(check_ptr), wmax = _max_degree(var_ptr)
    cdef Py_ssize_t l, a, e, j, best
    cdef int it = 0
    cdef bint zero = False
    cdef i64 acc
    v2c_arr = np.empty((max(E, 1), Q))
    c2v_arr = np.empty((max(E, 1), Q))
    marg_arr = np.empty((L, Q))
    hard_arr = np.zeros(L, dtype=np.int64)
    cdef double[:, ::1] v2c = v2c_arr
    cdef double[:, ::1] c2v = c2v_arr
    cdef double[:, ::1] marg = marg_arr
    cdef i64[::1] hard = hard_arr
    cdef double* y = <double*> malloc((dmax + 1) * Q * sizeof(double))
    cdef double* pre = <double*> malloc((max(dmax, wmax) + 2) * Q * sizeof(double))
    cdef double* suf = <double*> malloc((dmax + 2) * Q * sizeof(double))
    cdef double* s = <double*> malloc(Q * sizeof(double))
    try:
        with nogil:
            for e in range(E):
                l = edge_var[e]
                for a in range(Q):
                    v2c[e, a] = lam[l, a]
            while it < max_iters:
                it += 1
                if E:
                    _check_phase(&v2c[0, 0], &c2v[0, 0], &check_ptr[0], P, &perm[0, 0],
                                 &invperm[0, 0], Q, use_wht, y, pre, suf, s)
                _var_phase(&lam[0, 0], &c2v[0, 0], &v2c[0, 0], &marg[0, 0], &var_ptr[0],
                           &var_edges[0] if E else NULL, L, Q, floor, pre, suf)
                for l in range(L):
                    best = 0
                    for a in range(1, Q):
                        if marg[l, a] > marg[l, best]:
                            best = a
                    hard[l] = best
                zero = True
                for j in range(P):
                    acc = 0
                    for e in range(check_ptr[j], check_ptr[j + 1]):
                        acc = acc ^ perm[e, hard[edge_var[e]]]
                    if acc != 0:
                        zero = False
                        break
                if early_exit and zero:
                    break
    finally:
        free(y)
        free(pre)
        free(suf)
        free(s)
    return marg_arr, hard_arr, it, zero
