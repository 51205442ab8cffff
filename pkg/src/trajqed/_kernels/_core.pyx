# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stepping kernels: jump-trajectory evolution and Lindblad RK4.

Semantics intentionally mirror ``trajqed._kernels.py_ref``; the suite
cross-checks the two backends on identical inputs.
"""

from libc.math cimport fabs, sqrt
from libc.string cimport memcpy

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport zgemm

from trajqed.errors import DegenerateStateError, IntegrationError

cnp.import_array()

DEF PROB_FLOOR = 1e-15


cdef inline void _mm(double complex* a, double complex* b, double complex* c,
                     int d, double complex beta) noexcept nogil:
    # row-major c = a @ b + beta * c via column-major BLAS (c^T = b^T a^T)
    cdef char tn = b'N'
    cdef double complex one = 1.0
    zgemm(&tn, &tn, &d, &d, &d, &one, b, &d, a, &d, &beta, c, &d)


cdef inline void _add_dagger_inplace(double complex* t, int d) noexcept nogil:
    # t <- t + t^H
    cdef int i, j
    cdef double complex a, b
    for i in range(d):
        a = t[i * d + i]
        t[i * d + i] = a + a.conjugate()
        for j in range(i + 1, d):
            a = t[i * d + j]
            b = t[j * d + i]
            t[i * d + j] = a + b.conjugate()
            t[j * d + i] = b + a.conjugate()


cdef inline void _rehermitize(double complex* r, int d) noexcept nogil:
    # r <- (r + r^H) / 2
    cdef int i, j
    cdef double complex a, b
    for i in range(d):
        r[i * d + i] = r[i * d + i].real
        for j in range(i + 1, d):
            a = r[i * d + j]
            b = r[j * d + i]
            a = 0.5 * (a + b.conjugate())
            r[i * d + j] = a
            r[j * d + i] = a.conjugate()


cdef void _lindblad_rhs(double complex* A, double complex* B, double complex* Bdag,
                        int nc, double complex* rho, double complex* out,
                        double complex* tmp, int d) noexcept nogil:
    # out = A rho + (A rho)^H + sum_c B_c rho Bdag_c  (valid for Hermitian rho)
    cdef int c
    cdef double complex one = 1.0
    _mm(A, rho, out, d, 0.0)
    _add_dagger_inplace(out, d)
    for c in range(nc):
        _mm(B + c * d * d, rho, tmp, d, 0.0)
        _mm(tmp, Bdag + c * d * d, out, d, one)


def run_trajectory(ops, psi0, uniforms, sample_every):
    """Compiled counterpart of py_ref.run_trajectory (same contract)."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=3, mode="c"] O = \
        np.ascontiguousarray(ops, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] u = \
        np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t K = O.shape[0]
    cdef Py_ssize_t d = O.shape[1]
    cdef Py_ssize_t n_steps = u.shape[0]
    cdef Py_ssize_t stride = sample_every
    if n_steps % stride != 0:
        raise ValueError("sample_every must divide the number of steps")
    if K > 255:
        raise ValueError("at most 255 channels supported")
    cdef Py_ssize_t n_samples = n_steps // stride + 1

    cdef cnp.ndarray[cnp.uint8_t, ndim=1, mode="c"] outcomes = \
        np.empty(n_steps, dtype=np.uint8)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] samples = \
        np.empty((n_samples, d), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1, mode="c"] psi = \
        np.array(psi0, dtype=np.complex128).reshape(-1).copy()
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] y = \
        np.empty((K, d), dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] p = \
        np.empty(K, dtype=np.float64)
    if psi.shape[0] != d:
        raise ValueError("psi0 length does not match operator dimension")

    cdef double complex* op_ptr = <double complex*> O.data
    cdef double complex* psi_ptr = <double complex*> psi.data
    cdef double complex* y_ptr = <double complex*> y.data
    cdef double* p_ptr = <double*> p.data
    cdef double* u_ptr = <double*> u.data
    cdef unsigned char* out_ptr = <unsigned char*> outcomes.data
    cdef double complex* smp_ptr = <double complex*> samples.data

    cdef Py_ssize_t step, k, i, j, chosen
    cdef double pk, s, pmax, thr, c, inv
    cdef double complex acc
    cdef Py_ssize_t deg_step = -1

    memcpy(smp_ptr, psi_ptr, d * sizeof(double complex))
    with nogil:
        for step in range(n_steps):
            s = 0.0
            pmax = 0.0
            for k in range(K):
                pk = 0.0
                for i in range(d):
                    acc = 0.0
                    for j in range(d):
                        acc = acc + op_ptr[(k * d + i) * d + j] * psi_ptr[j]
                    y_ptr[k * d + i] = acc
                    pk += acc.real * acc.real + acc.imag * acc.imag
                p_ptr[k] = pk
                s += pk
                if pk > pmax:
                    pmax = pk
            if pmax < PROB_FLOOR:
                deg_step = step
                break
            thr = u_ptr[step] * s
            chosen = -1
            c = 0.0
            for k in range(K):
                c += p_ptr[k]
                if thr < c:
                    chosen = k
                    break
            if chosen < 0:
                for k in range(K - 1, -1, -1):
                    if p_ptr[k] > 0.0:
                        chosen = k
                        break
            inv = 1.0 / sqrt(p_ptr[chosen])
            for i in range(d):
                psi_ptr[i] = y_ptr[chosen * d + i] * inv
            out_ptr[step] = <unsigned char> chosen
            if (step + 1) % stride == 0:
                memcpy(smp_ptr + ((step + 1) // stride) * d, psi_ptr,
                       d * sizeof(double complex))

    if deg_step >= 0:
        raise DegenerateStateError(
            f"all channel probabilities below {PROB_FLOOR} at step {deg_step}"
        )
    return outcomes, samples


def lindblad_rk4_run(drift, jumps, rho0, double h, n_steps, snap_steps, double trace_tol):
    """Compiled counterpart of py_ref.lindblad_rk4_run (same contract)."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] A = \
        np.ascontiguousarray(drift, dtype=np.complex128)
    cdef Py_ssize_t d = A.shape[0]
    jumps_arr = np.ascontiguousarray(jumps, dtype=np.complex128).reshape(-1, d, d)
    cdef cnp.ndarray[cnp.complex128_t, ndim=3, mode="c"] B = jumps_arr
    cdef cnp.ndarray[cnp.complex128_t, ndim=3, mode="c"] Bd = \
        np.ascontiguousarray(jumps_arr.conj().transpose(0, 2, 1))
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] rho = \
        np.array(rho0, dtype=np.complex128).copy()
    cdef cnp.ndarray[cnp.int64_t, ndim=1, mode="c"] snaps_at = \
        np.ascontiguousarray(snap_steps, dtype=np.int64)
    cdef Py_ssize_t n_snap = snaps_at.shape[0]
    cdef Py_ssize_t total = n_steps
    cdef cnp.ndarray[cnp.complex128_t, ndim=3, mode="c"] snaps = \
        np.empty((n_snap, d, d), dtype=np.complex128)

    work = np.empty((6, d, d), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=3, mode="c"] W = work
    cdef double complex* a_ptr = <double complex*> A.data
    cdef double complex* b_ptr = <double complex*> B.data
    cdef double complex* bd_ptr = <double complex*> Bd.data
    cdef double complex* r_ptr = <double complex*> rho.data
    cdef double complex* snap_ptr = <double complex*> snaps.data
    cdef long long* at_ptr = <long long*> snaps_at.data
    cdef double complex* k1 = <double complex*> W.data
    cdef double complex* k2 = k1 + d * d
    cdef double complex* k3 = k2 + d * d
    cdef double complex* k4 = k3 + d * d
    cdef double complex* st = k4 + d * d
    cdef double complex* tmp = st + d * d
    cdef int nc = <int> B.shape[0]
    cdef int dd = <int> d
    cdef Py_ssize_t nn = d * d
    cdef Py_ssize_t step, i, j
    cdef double h2 = 0.5 * h
    cdef double h6 = h / 6.0
    cdef double tr_re, tr_im
    cdef Py_ssize_t bad_step = -1
    cdef double bad_drift = 0.0

    j = 0
    while j < n_snap and at_ptr[j] == 0:
        memcpy(snap_ptr + j * nn, r_ptr, nn * sizeof(double complex))
        j += 1
    with nogil:
        for step in range(1, total + 1):
            _lindblad_rhs(a_ptr, b_ptr, bd_ptr, nc, r_ptr, k1, tmp, dd)
            for i in range(nn):
                st[i] = r_ptr[i] + h2 * k1[i]
            _lindblad_rhs(a_ptr, b_ptr, bd_ptr, nc, st, k2, tmp, dd)
            for i in range(nn):
                st[i] = r_ptr[i] + h2 * k2[i]
            _lindblad_rhs(a_ptr, b_ptr, bd_ptr, nc, st, k3, tmp, dd)
            for i in range(nn):
                st[i] = r_ptr[i] + h * k3[i]
            _lindblad_rhs(a_ptr, b_ptr, bd_ptr, nc, st, k4, tmp, dd)
            for i in range(nn):
                r_ptr[i] = r_ptr[i] + h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            _rehermitize(r_ptr, dd)
            tr_re = 0.0
            tr_im = 0.0
            for i in range(dd):
                tr_re += r_ptr[i * dd + i].real
                tr_im += r_ptr[i * dd + i].imag
            if fabs(tr_re - 1.0) + fabs(tr_im) > trace_tol:
                bad_step = step
                bad_drift = fabs(tr_re - 1.0) + fabs(tr_im)
                break
            while j < n_snap and at_ptr[j] == step:
                memcpy(snap_ptr + j * nn, r_ptr, nn * sizeof(double complex))
                j += 1

    if bad_step >= 0:
        raise IntegrationError(
            f"trace drift {bad_drift:.3e} beyond {trace_tol} at step {bad_step}"
        )
    if j != n_snap:
        raise ValueError("snap_steps contains indices beyond n_steps")
    return snaps
