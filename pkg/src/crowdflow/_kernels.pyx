# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: RK4 shooting for the integrated 1D flux ODE and the
semi-implicit DG pseudo-time iteration on a uniform-structure 1D mesh.

Mirrors :mod:`crowdflow._kernels_py` call for call.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, INFINITY
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy
from scipy.linalg.cython_lapack cimport dgbsv

cnp.import_array()

IMPLEMENTATION = "compiled"

cdef double BLOWUP_LO = -1.0
cdef double BLOWUP_HI = 2.0


cdef inline double _rhs(double rho, double j, double inv_eps) noexcept nogil:
    return (rho * (1.0 - rho) - j) * inv_eps


cdef double _endpoint(double eps, double j, double rho, Py_ssize_t n_steps, int direction) noexcept nogil:
    cdef double h = direction * (1.0 / n_steps)
    cdef double inv_eps = 1.0 / eps
    cdef double k1, k2, k3, k4
    cdef Py_ssize_t i
    for i in range(n_steps):
        k1 = _rhs(rho, j, inv_eps)
        k2 = _rhs(rho + 0.5 * h * k1, j, inv_eps)
        k3 = _rhs(rho + 0.5 * h * k2, j, inv_eps)
        k4 = _rhs(rho + h * k3, j, inv_eps)
        rho = rho + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        if rho < BLOWUP_LO:
            return -INFINITY
        if rho > BLOWUP_HI:
            return INFINITY
    return rho


def shoot_endpoint(double eps, double j, double rho_start, Py_ssize_t n_steps, int direction):
    """Integrate eps rho' = rho (1 - rho) - j over the unit interval.

    ``direction`` +1 starts at x=0, -1 starts at x=1.  Trajectories leaving
    [-1, 2] return -inf/+inf.
    """
    return _endpoint(eps, j, rho_start, n_steps, direction)


cdef inline double _landing(double eps, double alpha, double beta, double j,
                            Py_ssize_t n_steps, int direction) noexcept nogil:
    # normalised so the residual decreases in j for both directions
    cdef double end
    if direction > 0:
        end = _endpoint(eps, j, 1.0 - j / alpha, n_steps, 1)
        return end - j / beta
    end = _endpoint(eps, j, j / beta, n_steps, -1)
    return (1.0 - j / alpha) - end


def landing_residual(double eps, double alpha, double beta, double j,
                     Py_ssize_t n_steps, int direction):
    return _landing(eps, alpha, beta, j, n_steps, direction)


def shoot_bisect(double eps, double alpha, double beta, double lo, double hi,
                 Py_ssize_t n_steps, int direction, int max_iter):
    """Bisection on the landing residual; requires residual(lo) > 0 >= residual(hi)."""
    cdef double r_lo, r_hi, mid, r_mid
    cdef int it
    with nogil:
        r_lo = _landing(eps, alpha, beta, lo, n_steps, direction)
        r_hi = _landing(eps, alpha, beta, hi, n_steps, direction)
        for it in range(max_iter):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            r_mid = _landing(eps, alpha, beta, mid, n_steps, direction)
            if r_mid > 0.0:
                lo = mid
                r_lo = r_mid
            else:
                hi = mid
                r_hi = r_mid
    return lo, hi, r_lo, r_hi


def rk4_profile(double eps, double j, double rho_start, Py_ssize_t n_steps, int direction):
    """Trajectory at the n_steps + 1 grid points, in the order integrated."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n_steps + 1)
    cdef double h = direction * (1.0 / n_steps)
    cdef double inv_eps = 1.0 / eps
    cdef double rho = rho_start, k1, k2, k3, k4
    cdef Py_ssize_t i
    out[0] = rho
    for i in range(n_steps):
        k1 = _rhs(rho, j, inv_eps)
        k2 = _rhs(rho + 0.5 * h * k1, j, inv_eps)
        k3 = _rhs(rho + 0.5 * h * k2, j, inv_eps)
        k4 = _rhs(rho + h * k3, j, inv_eps)
        rho = rho + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        out[i + 1] = rho
    return out


# DG pseudo-time iteration ------------------------------------------------------

cdef enum:
    KL = 3
    KU = 3
    LDAB = 2 * KL + KU + 1
    NB = 7


cdef inline double _get(double *a7, Py_ssize_t N, Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    return a7[(3 + i - j) * N + j]


cdef inline void _add7(double *a7, Py_ssize_t N, Py_ssize_t i, Py_ssize_t j, double v) noexcept nogil:
    a7[(3 + i - j) * N + j] += v


cdef int _block_thomas(double *a7, double *rhs, double *work, Py_ssize_t n) noexcept nogil:
    """Solve the block-tridiagonal (2x2 blocks) system in place; nonzero on a tiny pivot."""
    cdef Py_ssize_t N = 2 * n, c, p
    cdef double d00, d01, d10, d11, det, i00, i01, i10, i11
    cdef double l00, l01, l10, l11, w00, w01, w10, w11, u00, u01, u10, u11, y0, y1, scale
    # work holds the inverted modified diagonal blocks, 4 per cell
    for c in range(n):
        p = 2 * c
        d00 = _get(a7, N, p, p)
        d01 = _get(a7, N, p, p + 1)
        d10 = _get(a7, N, p + 1, p)
        d11 = _get(a7, N, p + 1, p + 1)
        if c > 0:
            l00 = _get(a7, N, p, p - 2)
            l01 = _get(a7, N, p, p - 1)
            l10 = _get(a7, N, p + 1, p - 2)
            l11 = _get(a7, N, p + 1, p - 1)
            i00 = work[4 * c - 4]
            i01 = work[4 * c - 3]
            i10 = work[4 * c - 2]
            i11 = work[4 * c - 1]
            w00 = l00 * i00 + l01 * i10
            w01 = l00 * i01 + l01 * i11
            w10 = l10 * i00 + l11 * i10
            w11 = l10 * i01 + l11 * i11
            u00 = _get(a7, N, p - 2, p)
            u01 = _get(a7, N, p - 2, p + 1)
            u10 = _get(a7, N, p - 1, p)
            u11 = _get(a7, N, p - 1, p + 1)
            d00 -= w00 * u00 + w01 * u10
            d01 -= w00 * u01 + w01 * u11
            d10 -= w10 * u00 + w11 * u10
            d11 -= w10 * u01 + w11 * u11
            y0 = rhs[p - 2]
            y1 = rhs[p - 1]
            rhs[p] -= w00 * y0 + w01 * y1
            rhs[p + 1] -= w10 * y0 + w11 * y1
        det = d00 * d11 - d01 * d10
        scale = fabs(d00) + fabs(d01) + fabs(d10) + fabs(d11)
        if not fabs(det) > 1e-12 * scale * scale:
            return 1
        work[4 * c] = d11 / det
        work[4 * c + 1] = -d01 / det
        work[4 * c + 2] = -d10 / det
        work[4 * c + 3] = d00 / det
    for c in range(n - 1, -1, -1):
        p = 2 * c
        y0 = rhs[p]
        y1 = rhs[p + 1]
        if c < n - 1:
            y0 -= _get(a7, N, p, p + 2) * rhs[p + 2] + _get(a7, N, p, p + 3) * rhs[p + 3]
            y1 -= _get(a7, N, p + 1, p + 2) * rhs[p + 2] + _get(a7, N, p + 1, p + 3) * rhs[p + 3]
        rhs[p] = work[4 * c] * y0 + work[4 * c + 1] * y1
        rhs[p + 1] = work[4 * c + 2] * y0 + work[4 * c + 3] * y1
    return 0


cdef int _band_lapack(double *a7, double *rhs, double *ab, int *ipiv, Py_ssize_t N) noexcept nogil:
    cdef int nn = <int> N, kl = KL, ku = KU, nrhs = 1, ldab = LDAB, ldb = <int> N, info = 0
    cdef Py_ssize_t r, col
    for r in range(LDAB * N):
        ab[r] = 0.0
    for col in range(N):
        for r in range(NB):
            if 0 <= col + r - 3 < N:
                ab[(KL + r) + col * LDAB] = a7[r * N + col]
    dgbsv(&nn, &kl, &ku, &nrhs, ab, &ldab, ipiv, rhs, &ldb, &info)
    return info


def dg1d_iterate(const double[:, ::1] static_ab, const double[::1] f, const double[::1] u,
                 const double[::1] h, const double[::1] rho0, double tau, double tol,
                 Py_ssize_t max_iter):
    """Run (M + tau A(rho_n)) rho_{n+1} = M rho_n + tau f until the L2 update / tau <= tol.

    ``static_ab`` holds M + tau (SWIP + Robin) in compact band storage
    (7 rows, ab[3 + i - j, j] = A[i, j]); the upwind part is rebuilt from the
    current iterate every step.  The matrix is block tridiagonal with 2x2
    blocks and is solved by block elimination, with a pivoted LAPACK band
    solve as fallback.  Returns (rho, iterations, update_norm, info).
    """
    cdef Py_ssize_t N = rho0.shape[0]
    cdef Py_ssize_t n = N // 2
    cdef Py_ssize_t c, p, q, a, b, r, it = 0
    cdef double *a7 = <double *> malloc(NB * N * sizeof(double))
    cdef double *a7copy = <double *> malloc(NB * N * sizeof(double))
    cdef double *ab = <double *> malloc(LDAB * N * sizeof(double))
    cdef double *rhs = <double *> malloc(N * sizeof(double))
    cdef double *rhs0 = <double *> malloc(N * sizeof(double))
    cdef double *work = <double *> malloc(2 * N * sizeof(double))
    cdef int *ipiv = <int *> malloc(N * sizeof(int))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rho_arr = np.array(rho0, dtype=np.float64)
    cdef double[::1] rho = rho_arr
    cdef int info = 0
    cdef double mp, mq, uc, w, aw, hc, dp, dq, norm2, norm = INFINITY
    if (a7 == NULL or a7copy == NULL or ab == NULL or rhs == NULL or rhs0 == NULL
            or work == NULL or ipiv == NULL):
        free(a7); free(a7copy); free(ab); free(rhs); free(rhs0); free(work); free(ipiv)
        raise MemoryError()
    try:
        with nogil:
            while it < max_iter:
                for r in range(NB):
                    for c in range(N):
                        a7[r * N + c] = static_ab[r, c]
                for c in range(n):
                    p = 2 * c
                    q = p + 1
                    mp = 1.0 - rho[p]
                    mq = 1.0 - rho[q]
                    uc = tau * u[c] / 6.0
                    _add7(a7, N, p, p, uc * (2.0 * mp + mq))
                    _add7(a7, N, p, q, uc * (2.0 * mq + mp))
                    _add7(a7, N, q, p, -uc * (2.0 * mp + mq))
                    _add7(a7, N, q, q, -uc * (2.0 * mq + mp))
                    hc = h[c] / 6.0
                    rhs[p] = hc * (2.0 * rho[p] + rho[q]) + tau * f[p]
                    rhs[q] = hc * (rho[p] + 2.0 * rho[q]) + tau * f[q]
                for c in range(n - 1):
                    a = 2 * c + 1
                    b = a + 1
                    w = (1.0 - 0.5 * (rho[a] + rho[b])) * 0.5 * (u[c] + u[c + 1])
                    aw = fabs(w)
                    _add7(a7, N, a, a, 0.5 * tau * (w + aw))
                    _add7(a7, N, a, b, 0.5 * tau * (w - aw))
                    _add7(a7, N, b, a, -0.5 * tau * (w + aw))
                    _add7(a7, N, b, b, 0.5 * tau * (aw - w))
                memcpy(a7copy, a7, NB * N * sizeof(double))
                memcpy(rhs0, rhs, N * sizeof(double))
                if _block_thomas(a7, rhs, work, n) != 0:
                    memcpy(rhs, rhs0, N * sizeof(double))
                    info = _band_lapack(a7copy, rhs, ab, ipiv, N)
                    if info != 0:
                        break
                norm2 = 0.0
                for c in range(n):
                    p = 2 * c
                    q = p + 1
                    dp = rhs[p] - rho[p]
                    dq = rhs[q] - rho[q]
                    norm2 += h[c] / 6.0 * (2.0 * dp * dp + 2.0 * dp * dq + 2.0 * dq * dq)
                    rho[p] = rhs[p]
                    rho[q] = rhs[q]
                it += 1
                norm = sqrt(norm2) / tau
                if norm <= tol:
                    break
    finally:
        free(a7); free(a7copy); free(ab); free(rhs); free(rhs0); free(work); free(ipiv)
    return rho_arr, it, norm, info
