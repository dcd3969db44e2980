# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-shot loop of the randomized double-Bell-measurement scheme.

Semantics are identical to :mod:`optomo._kernels_py`; see there for the
argument conventions.
"""

import numpy as np

from libc.math cimport sqrt

ctypedef double complex cplx


cdef inline cplx cconj(cplx z) noexcept nogil:
    return z.conjugate()


cdef inline double cabs2(cplx z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef void _mgs(const cplx[:, ::1] z, cplx[:, ::1] q, int d) noexcept nogil:
    # Gram-Schmidt on the columns; R then has a positive diagonal, so q is Haar
    cdef int i, j, r
    cdef cplx s
    cdef double nrm
    for j in range(d):
        for r in range(d):
            q[r, j] = z[r, j]
        for i in range(j):
            s = 0
            for r in range(d):
                s = s + cconj(q[r, i]) * q[r, j]
            for r in range(d):
                q[r, j] = q[r, j] - s * q[r, i]
        nrm = 0.0
        for r in range(d):
            nrm = nrm + cabs2(q[r, j])
        nrm = sqrt(nrm)
        for r in range(d):
            q[r, j] = q[r, j] / nrm


cdef void _conj_by(const cplx[:, ::1] X, const cplx[:, ::1] G, cplx[:, ::1] tmp,
                   cplx[:, ::1] out, int D) noexcept nogil:
    # out = G^dag X G
    cdef int a, b, c
    cdef cplx s
    for a in range(D):
        for b in range(D):
            s = 0
            for c in range(D):
                s = s + X[a, c] * G[c, b]
            tmp[a, b] = s
    for a in range(D):
        for b in range(D):
            s = 0
            for c in range(D):
                s = s + cconj(G[c, a]) * tmp[c, b]
            out[a, b] = s


def simulate_block(const cplx[:, :, ::1] zg, const cplx[:, :, ::1] zh, const double[::1] u,
                   const cplx[:, ::1] R, const cplx[:, ::1] M, const double[::1] w,
                   const cplx[:, :, ::1] K, const cplx[:, :, ::1] obs):
    cdef Py_ssize_t N = zg.shape[0]
    cdef int d = zg.shape[1]
    cdef int D = d * d
    cdef int n_el = M.shape[0]
    cdef int n_obs = obs.shape[0]

    outcome_arr = np.empty(N, dtype=np.int64)
    values_arr = np.zeros((N, n_obs), dtype=np.float64)
    psum_arr = np.empty(N, dtype=np.float64)
    pmin_arr = np.empty(N, dtype=np.float64)
    cdef long long[::1] outcome = outcome_arr
    cdef double[:, ::1] values = values_arr
    cdef double[::1] psum = psum_arr
    cdef double[::1] pmin = pmin_arr

    cdef cplx[:, ::1] qa = np.empty((d, d), dtype=np.complex128)
    cdef cplx[:, ::1] qb = np.empty((d, d), dtype=np.complex128)
    cdef cplx[:, ::1] G = np.empty((D, D), dtype=np.complex128)
    cdef cplx[:, ::1] tmp = np.empty((D, D), dtype=np.complex128)
    cdef cplx[:, ::1] Rp = np.empty((D, D), dtype=np.complex128)
    cdef cplx[:, ::1] Ap = np.empty((D, D), dtype=np.complex128)
    cdef double[::1] p = np.empty(n_el, dtype=np.float64)

    cdef Py_ssize_t s
    cdef int i1, i2, j1, j2, e, a, b, o, out
    cdef cplx acc, v
    cdef double tot, lo, c, pe

    with nogil:
        for s in range(N):
            _mgs(zg[s], qa, d)
            _mgs(zh[s], qb, d)
            for i1 in range(d):
                for i2 in range(d):
                    for j1 in range(d):
                        for j2 in range(d):
                            G[i1 * d + i2, j1 * d + j2] = qa[i1, j1] * qb[i2, j2]
            _conj_by(R, G, tmp, Rp, D)
            tot = 0.0
            lo = 0.0
            for e in range(n_el):
                acc = 0
                for a in range(D):
                    v = 0
                    for b in range(D):
                        v = v + Rp[a, b] * M[e, b]
                    acc = acc + cconj(M[e, a]) * v
                p[e] = w[e] * acc.real
                tot = tot + p[e]
                if e == 0 or p[e] < lo:
                    lo = p[e]
            psum[s] = tot
            pmin[s] = lo
            out = n_el
            c = 0.0
            for e in range(n_el):
                pe = p[e]
                if pe < 0.0:
                    pe = 0.0
                c = c + pe
                if u[s] < c:
                    out = e
                    break
            outcome[s] = out
            if out < n_el:
                for o in range(n_obs):
                    _conj_by(obs[o], G, tmp, Ap, D)
                    acc = 0
                    for a in range(D):
                        for b in range(D):
                            acc = acc + K[out, a, b] * Ap[b, a]
                    values[s, o] = acc.real
    return outcome_arr, values_arr, psum_arr, pmin_arr
