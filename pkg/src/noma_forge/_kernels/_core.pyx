# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled rate/gradient kernels.

Same contract as noma_forge._kernels.pure; see that module for the math.
Summations run in the same index order as the NumPy reference so the two
backends agree to rounding noise.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, log2

cnp.import_array()

cdef double LN2 = log(2.0)


cdef void _gains(cnp.complex128_t[:, :, ::1] Heff, cnp.complex128_t[:, ::1] W,
                 cnp.complex128_t[:, ::1] U, double[:, ::1] G, double[::1] T) noexcept nogil:
    cdef Py_ssize_t K = W.shape[0], Nt = W.shape[1]
    cdef Py_ssize_t k, j, t
    cdef double complex acc
    cdef double g, tot
    for k in range(K):
        tot = 0.0
        for j in range(K):
            acc = 0
            for t in range(Nt):
                acc = acc + Heff[k, j, t] * W[j, t]
            U[k, j] = acc
            g = acc.real * acc.real + acc.imag * acc.imag
            G[k, j] = g
            tot = tot + g
        T[k] = tot


cdef void _rate_table(double[:, ::1] G, double[::1] T, double[::1] noise,
                      cnp.int32_t[::1] ord_idx, cnp.int64_t[::1] ord_ptr,
                      double[:, ::1] R, double[:, ::1] INTF) noexcept nogil:
    cdef Py_ssize_t K = G.shape[0]
    cdef Py_ssize_t k, p, i
    cdef double g, cancelled, interf
    for k in range(K):
        cancelled = 0.0
        for p in range(ord_ptr[k], ord_ptr[k + 1]):
            i = ord_idx[p]
            g = G[k, i]
            interf = noise[k] + (T[k] - g - cancelled)
            R[i, k] = log2(1.0 + g / interf)
            INTF[i, k] = interf
            cancelled = cancelled + g


cdef double _smin_sum(double[:, ::1] R, cnp.int32_t[::1] ord_idx, cnp.int64_t[::1] ord_ptr,
                      double beta, double[::1] rmin, double[::1] Z,
                      double[:, ::1] lam, bint want_lam) noexcept nogil:
    # Soft minimum per signal over its decoders; the decoder set of signal i
    # is exactly the receivers whose order lists i.  Shift by the row min
    # for stability.  lam gets the softmin weights when requested.
    cdef Py_ssize_t K = R.shape[0]
    cdef Py_ssize_t k, p, i
    cdef double total = 0.0, e
    for i in range(K):
        rmin[i] = 1e300
        Z[i] = 0.0
    for k in range(K):
        for p in range(ord_ptr[k], ord_ptr[k + 1]):
            i = ord_idx[p]
            if R[i, k] < rmin[i]:
                rmin[i] = R[i, k]
    for k in range(K):
        for p in range(ord_ptr[k], ord_ptr[k + 1]):
            i = ord_idx[p]
            e = exp(-beta * (R[i, k] - rmin[i]))
            Z[i] = Z[i] + e
            if want_lam:
                lam[i, k] = e
    for i in range(K):
        total = total + rmin[i] - log(Z[i]) / beta
        if want_lam:
            for k in range(K):
                lam[i, k] = lam[i, k] / Z[i]
    return total


def gain_products(cnp.complex128_t[:, :, ::1] Heff, cnp.complex128_t[:, ::1] W):
    cdef Py_ssize_t K = W.shape[0], Nt = W.shape[1]
    cdef Py_ssize_t k, j, t
    cdef double complex acc
    U_arr = np.empty((K, K), dtype=np.complex128)
    cdef cnp.complex128_t[:, ::1] U = U_arr
    for k in range(K):
        for j in range(K):
            acc = 0
            for t in range(Nt):
                acc = acc + Heff[k, j, t] * W[j, t]
            U[k, j] = acc
    return U_arr


def decode_rates(cnp.complex128_t[:, :, ::1] Heff, cnp.complex128_t[:, ::1] W,
                 double[::1] noise, cnp.int32_t[::1] ord_idx, cnp.int64_t[::1] ord_ptr):
    cdef Py_ssize_t K = W.shape[0]
    U_arr = np.empty((K, K), dtype=np.complex128)
    R_arr = np.zeros((K, K))
    G_arr = np.empty((K, K))
    INTF_arr = np.zeros((K, K))
    T_arr = np.empty(K)
    cdef cnp.complex128_t[:, ::1] U = U_arr
    cdef double[:, ::1] R = R_arr, G = G_arr, INTF = INTF_arr
    cdef double[::1] T = T_arr
    _gains(Heff, W, U, G, T)
    _rate_table(G, T, noise, ord_idx, ord_ptr, R, INTF)
    return R_arr, U_arr


def smoothed_objective(cnp.complex128_t[:, :, ::1] Heff, cnp.complex128_t[:, ::1] W,
                       double[::1] noise, double beta,
                       cnp.int32_t[::1] ord_idx, cnp.int64_t[::1] ord_ptr):
    cdef Py_ssize_t K = W.shape[0]
    U_arr = np.empty((K, K), dtype=np.complex128)
    G_arr = np.empty((K, K))
    R_arr = np.zeros((K, K))
    INTF_arr = np.zeros((K, K))
    T_arr = np.empty(K)
    rmin_arr = np.empty(K)
    Z_arr = np.empty(K)
    lam_arr = np.empty((0, 0))
    cdef cnp.complex128_t[:, ::1] U = U_arr
    cdef double[:, ::1] G = G_arr, R = R_arr, INTF = INTF_arr, lam = lam_arr
    cdef double[::1] T = T_arr, rmin = rmin_arr, Z = Z_arr
    _gains(Heff, W, U, G, T)
    _rate_table(G, T, noise, ord_idx, ord_ptr, R, INTF)
    return _smin_sum(R, ord_idx, ord_ptr, beta, rmin, Z, lam, False)


def achievable_sum_rate(cnp.complex128_t[:, :, ::1] Heff, cnp.complex128_t[:, ::1] W,
                        double[::1] noise, cnp.int32_t[::1] dec_idx, cnp.int64_t[::1] dec_ptr):
    """Sum of min-over-decoders rates under the canonical decode orders.

    dec_idx/dec_ptr hold each receiver's decode set in ascending index
    order; decoding runs in descending effective gain (stable, so ties fall
    back to ascending index), own signal last.
    """
    cdef Py_ssize_t K = W.shape[0]
    cdef Py_ssize_t k, p, q, i, m
    cdef double g, cancelled, interf, r, total

    U_arr = np.empty((K, K), dtype=np.complex128)
    G_arr = np.empty((K, K))
    T_arr = np.empty(K)
    amin_arr = np.full(K, 1e300)
    seq_arr = np.empty(K + 1, dtype=np.int64)
    key_arr = np.empty(K + 1)

    cdef cnp.complex128_t[:, ::1] U = U_arr
    cdef double[:, ::1] G = G_arr
    cdef double[::1] T = T_arr, amin = amin_arr, key = key_arr
    cdef cnp.int64_t[::1] seq = seq_arr
    cdef cnp.int64_t tmp_i
    cdef double tmp_k

    _gains(Heff, W, U, G, T)

    for k in range(K):
        m = dec_ptr[k + 1] - dec_ptr[k]
        for p in range(m):
            seq[p] = dec_idx[dec_ptr[k] + p]
            key[p] = G[k, seq[p]]
        # stable insertion sort, descending gain
        for p in range(1, m):
            tmp_i = seq[p]
            tmp_k = key[p]
            q = p - 1
            while q >= 0 and key[q] < tmp_k:
                seq[q + 1] = seq[q]
                key[q + 1] = key[q]
                q = q - 1
            seq[q + 1] = tmp_i
            key[q + 1] = tmp_k
        seq[m] = k
        cancelled = 0.0
        for p in range(m + 1):
            i = seq[p]
            g = G[k, i]
            interf = noise[k] + (T[k] - g - cancelled)
            r = log2(1.0 + g / interf)
            if r < amin[i]:
                amin[i] = r
            cancelled = cancelled + g

    total = 0.0
    for i in range(K):
        total = total + amin[i]
    return total


def smoothed_objective_grad(cnp.complex128_t[:, :, ::1] Heff, cnp.complex128_t[:, ::1] W,
                            double[::1] noise, double beta,
                            cnp.int32_t[::1] ord_idx, cnp.int64_t[::1] ord_ptr):
    cdef Py_ssize_t K = W.shape[0], Nt = W.shape[1]
    cdef Py_ssize_t k, p, i, j, t, base, m
    cdef double g, suffix, F, interf, l, bsum
    cdef double complex cu

    U_arr = np.empty((K, K), dtype=np.complex128)
    G_arr = np.empty((K, K))
    R_arr = np.zeros((K, K))
    INTF_arr = np.zeros((K, K))
    T_arr = np.empty(K)
    rmin_arr = np.empty(K)
    Z_arr = np.empty(K)
    lam_arr = np.zeros((K, K))
    c_arr = np.zeros((K, K))
    grad_arr = np.zeros((K, Nt), dtype=np.complex128)
    b_arr = np.empty(K)

    cdef cnp.complex128_t[:, ::1] U = U_arr
    cdef cnp.complex128_t[:, ::1] grad = grad_arr
    cdef double[:, ::1] G = G_arr, R = R_arr, INTF = INTF_arr, lam = lam_arr, c = c_arr
    cdef double[::1] T = T_arr, rmin = rmin_arr, Z = Z_arr, b = b_arr

    _gains(Heff, W, U, G, T)
    _rate_table(G, T, noise, ord_idx, ord_ptr, R, INTF)
    F = _smin_sum(R, ord_idx, ord_ptr, beta, rmin, Z, lam, True)

    for k in range(K):
        base = ord_ptr[k]
        m = ord_ptr[k + 1] - base
        bsum = 0.0
        for p in range(m):
            i = ord_idx[base + p]
            g = G[k, i]
            interf = INTF[i, k]
            l = lam[i, k]
            c[k, i] = c[k, i] + l / (LN2 * (interf + g))
            b[p] = -l * g / (LN2 * interf * (interf + g))
            bsum = bsum + b[p]
        for j in range(K):
            c[k, j] = c[k, j] + bsum
        suffix = 0.0
        for p in range(m - 1, -1, -1):
            suffix = suffix + b[p]
            i = ord_idx[base + p]
            c[k, i] = c[k, i] - suffix

    for j in range(K):
        for k in range(K):
            cu = c[k, j] * U[k, j]
            for t in range(Nt):
                grad[j, t] = grad[j, t] + 2.0 * cu * (Heff[k, j, t].real - 1j * Heff[k, j, t].imag)

    return F, grad_arr
