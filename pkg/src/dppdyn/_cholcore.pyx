# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled factorization hot kernels.

Mirror of dppdyn._chol_py (which documents the contract); kept in lockstep
by tests/test_backends.py. Fused on float64 / complex128 so real and
complex kernels share one code path.
"""

from libc.math cimport sqrt

import numpy as np


ctypedef fused scalar:
    double
    double complex


cdef inline scalar _conj(scalar x) noexcept nogil:
    if scalar is double:
        return x
    else:
        return x.conjugate()


cdef inline double _abs2(scalar x) noexcept nogil:
    if scalar is double:
        return x * x
    else:
        return x.real * x.real + x.imag * x.imag


cdef inline double _re(scalar x) noexcept nogil:
    if scalar is double:
        return x
    else:
        return x.real


cdef void _forward(scalar[:, ::1] L, Py_ssize_t k, scalar[:, ::1] b) noexcept nogil:
    # b <- L^-1 b for all columns of b.
    cdef Py_ssize_t i, j, c
    cdef Py_ssize_t m = b.shape[1]
    cdef scalar acc
    for c in range(m):
        for i in range(k):
            acc = b[i, c]
            for j in range(i):
                acc = acc - L[i, j] * b[j, c]
            b[i, c] = acc / L[i, i]


def chol_append(scalar[:, ::1] L, Py_ssize_t k, scalar[::1] col, double diag):
    cdef Py_ssize_t i, j
    cdef scalar acc
    cdef double nrm2 = 0.0, s
    with nogil:
        for i in range(k):
            acc = col[i]
            for j in range(i):
                acc = acc - L[i, j] * col[j]
            col[i] = acc / L[i, i]
            nrm2 += _abs2(col[i])
        s = diag - nrm2
        if s > 0.0:
            for j in range(k):
                L[k, j] = _conj(col[j])
            L[k, k] = sqrt(s)
    return s


def chol_drop(scalar[:, ::1] L, Py_ssize_t k, Py_ssize_t idx):
    cdef Py_ssize_t m = k - idx - 1
    if m == 0:
        return
    v_arr = np.empty(m, dtype=np.asarray(L).dtype)
    cdef scalar[::1] v = v_arr
    cdef Py_ssize_t r, c, j, i, jj
    cdef double a, rr, cc
    cdef scalar b, ss, tail
    with nogil:
        for r in range(m):
            v[r] = L[idx + 1 + r, idx]
        for r in range(m):
            for c in range(idx):
                L[idx + r, c] = L[idx + 1 + r, c]
            for c in range(r + 1):
                L[idx + r, idx + c] = L[idx + 1 + r, idx + 1 + c]
        # Rank-one update of the shifted trailing block with v.
        for j in range(m):
            jj = idx + j
            a = _re(L[jj, jj])
            b = v[j]
            rr = sqrt(a * a + _abs2(b))
            cc = a / rr
            ss = _conj(b) / rr
            L[jj, jj] = rr
            for i in range(j + 1, m):
                tail = L[idx + i, jj]
                L[idx + i, jj] = cc * tail + ss * v[i]
                v[i] = cc * v[i] - _conj(ss) * tail


def schur_batch(scalar[:, ::1] L, Py_ssize_t k, scalar[:, ::1] cols,
                double[::1] diags, double[::1] out):
    cdef Py_ssize_t m = cols.shape[1]
    cdef Py_ssize_t c, i
    cdef double nrm2
    if k == 0:
        for c in range(m):
            out[c] = diags[c]
        return
    with nogil:
        _forward(L, k, cols)
        for c in range(m):
            nrm2 = 0.0
            for i in range(k):
                nrm2 += _abs2(cols[i, c])
            out[c] = diags[c] - nrm2


def backward_conj_solve(scalar[:, ::1] L, Py_ssize_t k, scalar[:, ::1] b):
    cdef Py_ssize_t i, j, c
    cdef Py_ssize_t m = b.shape[1]
    cdef scalar acc
    if k == 0:
        return
    with nogil:
        for c in range(m):
            for i in range(k - 1, -1, -1):
                acc = b[i, c]
                for j in range(i + 1, k):
                    acc = acc - _conj(L[j, i]) * b[j, c]
                b[i, c] = acc / L[i, i]


def inv_diag(scalar[:, ::1] L, Py_ssize_t k, double[::1] out):
    # out[i] = || L^-1 e_i ||^2, accumulated column by column.
    if k == 0:
        return
    z_arr = np.empty(k, dtype=np.asarray(L).dtype)
    cdef scalar[::1] z = z_arr
    cdef Py_ssize_t i, r, j
    cdef scalar acc
    cdef double nrm2
    with nogil:
        for i in range(k):
            nrm2 = 0.0
            for r in range(i, k):
                acc = 1.0 if r == i else 0.0
                for j in range(i, r):
                    acc = acc - L[r, j] * z[j]
                z[r] = acc / L[r, r]
                nrm2 += _abs2(z[r])
            out[i] = nrm2


def projection_sample(scalar[:, ::1] H, Py_ssize_t m, double[::1] uniforms,
                      Py_ssize_t[::1] out):
    cdef Py_ssize_t n = H.shape[0]
    cdef Py_ssize_t step, i, j, x
    cdef double total, target, cum, p, pivot
    col_arr = np.empty(n, dtype=np.asarray(H).dtype)
    row_arr = np.empty(n, dtype=np.asarray(H).dtype)
    cdef scalar[::1] colx = col_arr
    cdef scalar[::1] rowx = row_arr
    with nogil:
        for step in range(m):
            total = 0.0
            for i in range(n):
                p = _re(H[i, i])
                if p > 0.0:
                    total += p
            target = uniforms[step] * total
            cum = 0.0
            x = n - 1
            for i in range(n):
                p = _re(H[i, i])
                if p > 0.0:
                    cum += p
                if cum > target:
                    x = i
                    break
            pivot = _re(H[x, x])
            for i in range(n):
                colx[i] = H[i, x]
                rowx[i] = H[x, i]
            for i in range(n):
                for j in range(n):
                    H[i, j] = H[i, j] - colx[i] * rowx[j] / pivot
            # Exact-arithmetic zeros; clear rounding residue so x cannot recur.
            for i in range(n):
                H[x, i] = 0.0
                H[i, x] = 0.0
            out[step] = x
