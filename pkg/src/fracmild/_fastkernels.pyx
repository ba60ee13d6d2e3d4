# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of fracmild._kernels_py (same contracts, typed loops).

Selected automatically by fracmild.backend when built; the pure NumPy
module remains the reference implementation and the fallback.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, pow, tgamma
from scipy.linalg.cython_blas cimport dgemm, dgemv

BACKEND_NAME = "compiled"


cdef void _matmul_rows_by_synth(double* wt, double* synth, double* out,
                                int n_rows, int I, int J) noexcept nogil:
    # row-major (n_rows, I) @ (I, J) -> row-major (n_rows, J), via the
    # column-major identity C^T = B^T A^T
    cdef double one = 1.0, zero = 0.0
    cdef char cn = b'N'
    dgemm(&cn, &cn, &J, &n_rows, &I, &one, synth, &J, wt, &I, &zero, out, &J)


cdef void _matvec_psi(double* psi_m, double* vn, double* y, int I, int J) noexcept nogil:
    # y(I) = Psi_m(I,J) vn(J) with Psi_m row-major
    cdef double one = 1.0, zero = 0.0
    cdef int inc = 1
    cdef char ct = b'T'
    dgemv(&ct, &J, &I, &one, psi_m, &J, vn, &inc, &zero, y, &inc)


def left_operator_profile(object B_in, double h, double eta, object tables):
    cdef cnp.ndarray B_arr = np.ascontiguousarray(B_in)
    cdef double[:, :, ::1] B = B_arr
    cdef Py_ssize_t npts = B.shape[0], I = B.shape[1], J = B.shape[2]
    psi_np = np.empty((npts, I, J))
    cdef double[:, :, ::1] psi = psi_np
    cdef double[::1] g0 = np.ascontiguousarray(tables.g0)
    cdef double[::1] mu0c = np.ascontiguousarray(tables.mu0_cumsum)
    cdef double[:, ::1] m0 = np.ascontiguousarray(tables.m0)
    cdef double[:, ::1] m1 = np.ascontiguousarray(tables.m1)
    cdef double[::1] m1cum = np.ascontiguousarray(tables.m1cum)
    tmp_np = np.empty((I, J))
    cdef double[:, ::1] tmp = tmp_np
    cdef Py_ssize_t m, i, j, k
    cdef double f0, cfirst, w0, w1, xm
    for i in range(I):
        for j in range(J):
            psi[0, i, j] = B[0, i, j]
    for m in range(1, npts):
        xm = pow(m * h, eta) * eta
        for i in range(I):
            f0 = g0[i] + mu0c[m - 1]
            cfirst = m1cum[i] / h
            for j in range(J):
                tmp[i, j] = B[m, i, j] * f0 - (B[m - 1, i, j] - B[m, i, j]) * cfirst
        for k in range(1, m):
            for i in range(I):
                w0 = m0[i, k]
                w1 = (m1[i, k] - k * h * m0[i, k]) / h
                for j in range(J):
                    tmp[i, j] -= B[m - k, i, j] * w0 + (B[m - k - 1, i, j] - B[m - k, i, j]) * w1
        for i in range(I):
            for j in range(J):
                psi[m, i, j] = B[m, i, j] + xm * tmp[i, j]
    return psi_np


def right_derivative_table(object zc_in, double h, double nu, object tables):
    cdef cnp.ndarray zc_arr = np.ascontiguousarray(zc_in)
    cdef double[:, ::1] zc = zc_arr
    cdef Py_ssize_t npts = zc.shape[0], I = zc.shape[1]
    w_np = np.zeros((npts, npts, I))
    cdef double[:, :, ::1] w = w_np
    inner_np = np.zeros((npts, I))
    cdef double[:, ::1] inner = inner_np
    cdef double[::1] nu0 = np.ascontiguousarray(tables.nu0)
    cdef double[::1] nu1 = np.ascontiguousarray(tables.nu1)
    cdef double pref = 1.0 / tgamma(1.0 - nu)
    cdef Py_ssize_t k, m, i, l, jl
    cdef double a0, a1, lag, first
    first = nu1[0] / h
    for k in range(1, npts):
        l = k - 1
        for i in range(I):
            inner[l, i] += (zc[l + 1, i] - zc[l, i]) * first
        for m in range(l):
            jl = l - m
            a0 = nu0[jl]
            a1 = (nu1[jl] - jl * h * nu0[jl]) / h
            for i in range(I):
                inner[m, i] += (zc[l, i] - zc[m, i]) * a0 + (zc[l + 1, i] - zc[l, i]) * a1
        for m in range(k):
            lag = pow((k - m) * h, -nu)
            for i in range(I):
                w[k, m, i] = pref * ((zc[k, i] - zc[m, i]) * lag + nu * inner[m, i])
    return w_np


def right_derivative_profile(object zc_in, double h, double nu, object tables):
    cdef cnp.ndarray zc_arr = np.ascontiguousarray(zc_in)
    cdef double[:, ::1] zc = zc_arr
    cdef Py_ssize_t npts = zc.shape[0], I = zc.shape[1]
    cdef Py_ssize_t n = npts - 1
    out_np = np.zeros((npts, I))
    cdef double[:, ::1] out = out_np
    cdef double[::1] nu0 = np.ascontiguousarray(tables.nu0)
    cdef double[::1] nu1 = np.ascontiguousarray(tables.nu1)
    cdef double pref = 1.0 / tgamma(1.0 - nu)
    cdef Py_ssize_t m, l, i, j
    cdef double a0, a1, lag, first
    first = nu1[0] / h
    for m in range(n):
        for i in range(I):
            out[m, i] = (zc[m + 1, i] - zc[m, i]) * first
        for l in range(m + 1, n):
            j = l - m
            a0 = nu0[j]
            a1 = (nu1[j] - j * h * nu0[j]) / h
            for i in range(I):
                out[m, i] += (zc[l, i] - zc[m, i]) * a0 + (zc[l + 1, i] - zc[l, i]) * a1
        lag = pow((n - m) * h, -nu)
        for i in range(I):
            out[m, i] = pref * ((zc[n, i] - zc[m, i]) * lag + nu * out[m, i])
    return out_np


def convolve_targets(object psi_in, object w_in, object zc_in, object synth_in, object explag_in,
                     object w0_in, object w1_in, double h, double eta):
    cdef double[:, :, ::1] psi = np.ascontiguousarray(psi_in)
    cdef double[:, :, ::1] wt = np.ascontiguousarray(w_in)
    cdef double[:, ::1] zc = np.ascontiguousarray(zc_in)
    cdef double[:, ::1] synth = np.ascontiguousarray(synth_in)
    cdef double[:, ::1] explag = np.ascontiguousarray(explag_in)
    cdef double[::1] w0 = np.ascontiguousarray(w0_in)
    cdef double[::1] w1 = np.ascontiguousarray(w1_in)
    cdef Py_ssize_t npts = psi.shape[0], I = psi.shape[1], J = psi.shape[2]
    out_np = np.zeros((npts, I))
    cdef double[:, ::1] out = out_np
    y_np = np.empty((npts, I))
    cdef double[:, ::1] y = y_np
    vn_np = np.empty(J)
    cdef double[::1] vn = vn_np
    cdef double pref = 1.0 / tgamma(1.0 - eta)
    cdef double ginv = 1.0 / tgamma(1.0 + eta)
    cdef double beta0 = h * tgamma(1.0 - eta) * tgamma(1.0 + eta)
    cdef double beta1 = h * tgamma(2.0 - eta) * tgamma(1.0 + eta) / 2.0
    cdef double p0 = pow(h, 1.0 + eta) / (1.0 + eta)
    cdef double p1 = pow(h, 1.0 + eta) / ((1.0 + eta) * (2.0 + eta))
    cdef double heta = pow(h, eta)
    vnod_np = np.empty((npts, J))
    cdef double[:, ::1] vnod = vnod_np
    cdef double[::1] ytip = np.empty(I)
    cdef Py_ssize_t k, m, i, j
    cdef double s, psi1, ql, q0, q1
    cdef int ii = <int> I, jj = <int> J
    for k in range(1, npts):
        # nodal values of rho_k at m = 0..k-1 (the node at t_k is singular-exact)
        _matmul_rows_by_synth(&wt[k, 0, 0], &synth[0, 0], &vnod[0, 0], <int> k, ii, jj)
        for m in range(k):
            _matvec_psi(&psi[m, 0, 0], &vnod[m, 0], &y[m, 0], ii, jj)
            for i in range(I):
                y[m, i] *= explag[i, k - m]
        for j in range(J):
            vn[j] = 0.0
        for i in range(I):
            s = (zc[k, i] - zc[k - 1, i]) / h
            if s != 0.0:
                for j in range(J):
                    vn[j] += s * synth[i, j]
        _matvec_psi(&psi[k, 0, 0], &vn[0], &ytip[0], ii, jj)
        for i in range(I):
            psi1 = ytip[i] * ginv
            ql = y[k - 1, i] / heta
            if k == 1:
                out[k, i] = pref * (ql * beta0 + (psi1 - ql) * beta1)
            else:
                s = 0.0
                for m in range(k - 1):
                    s += w0[m] * y[m, i] + w1[m] * (y[m + 1, i] - y[m, i]) / h
                q0 = pow((k - 1) * h, -eta) * ql
                q1 = pow(k * h, -eta) * psi1
                out[k, i] = pref * (s + q0 * p0 + (q1 - q0) * p1)
    return out_np


def convolve_single(object psi_in, object wprof_in, object zc_in, object synth_in, object explag_in,
                    object w0_in, object w1_in, double h, double eta):
    cdef double[:, :, ::1] psi = np.ascontiguousarray(psi_in)
    cdef double[:, ::1] wp = np.ascontiguousarray(wprof_in)
    cdef double[:, ::1] zc = np.ascontiguousarray(zc_in)
    cdef double[:, ::1] synth = np.ascontiguousarray(synth_in)
    cdef double[:, ::1] explag = np.ascontiguousarray(explag_in)
    cdef double[::1] w0 = np.ascontiguousarray(w0_in)
    cdef double[::1] w1 = np.ascontiguousarray(w1_in)
    cdef Py_ssize_t npts = psi.shape[0], I = psi.shape[1], J = psi.shape[2]
    cdef Py_ssize_t n = npts - 1
    out_np = np.zeros(I)
    cdef double[::1] out = out_np
    y_np = np.empty((npts, I))
    cdef double[:, ::1] y = y_np
    vn_np = np.empty(J)
    cdef double[::1] vn = vn_np
    cdef double pref = 1.0 / tgamma(1.0 - eta)
    cdef double ginv = 1.0 / tgamma(1.0 + eta)
    cdef double beta0 = h * tgamma(1.0 - eta) * tgamma(1.0 + eta)
    cdef double beta1 = h * tgamma(2.0 - eta) * tgamma(1.0 + eta) / 2.0
    cdef double p0 = pow(h, 1.0 + eta) / (1.0 + eta)
    cdef double p1 = pow(h, 1.0 + eta) / ((1.0 + eta) * (2.0 + eta))
    cdef double heta = pow(h, eta)
    vnod_np = np.empty((npts, J))
    cdef double[:, ::1] vnod = vnod_np
    cdef double[::1] ytip = np.empty(I)
    cdef Py_ssize_t m, i, j
    cdef double s, psi1, ql, q0, q1
    cdef int ii = <int> I, jj = <int> J
    _matmul_rows_by_synth(&wp[0, 0], &synth[0, 0], &vnod[0, 0], <int> n, ii, jj)
    for m in range(n):
        _matvec_psi(&psi[m, 0, 0], &vnod[m, 0], &y[m, 0], ii, jj)
        for i in range(I):
            y[m, i] *= explag[i, n - m]
    for j in range(J):
        vn[j] = 0.0
    for i in range(I):
        s = (zc[n, i] - zc[n - 1, i]) / h
        if s != 0.0:
            for j in range(J):
                vn[j] += s * synth[i, j]
    _matvec_psi(&psi[n, 0, 0], &vn[0], &ytip[0], ii, jj)
    for i in range(I):
        psi1 = ytip[i] * ginv
        ql = y[n - 1, i] / heta
        if n == 1:
            out[i] = pref * (ql * beta0 + (psi1 - ql) * beta1)
        else:
            s = 0.0
            for m in range(n - 1):
                s += w0[m] * y[m, i] + w1[m] * (y[m + 1, i] - y[m, i]) / h
            q0 = pow((n - 1) * h, -eta) * ql
            q1 = pow(n * h, -eta) * psi1
            out[i] = pref * (s + q0 * p0 + (q1 - q0) * p1)
    return out_np


def exp_conv_path(object phi_in, object lam_in, double h):
    cdef double[:, ::1] phi = np.ascontiguousarray(phi_in)
    cdef double[::1] lam = np.ascontiguousarray(lam_in)
    cdef Py_ssize_t npts = phi.shape[0], I = phi.shape[1]
    out_np = np.zeros((npts, I))
    cdef double[:, ::1] out = out_np
    cdef Py_ssize_t k, i
    cdef double x, em1, phi1, psi, ca, cb, dec
    for i in range(I):
        x = lam[i] * h
        if x < 1e-3:
            phi1 = 1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0
            psi = 0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0
        else:
            em1 = 1.0 - exp(-x)
            phi1 = em1 / x
            psi = (1.0 - exp(-x) * (1.0 + x)) / (x * x)
        ca = h * phi1
        cb = h * (phi1 - psi)
        dec = exp(-x)
        for k in range(npts - 1):
            out[k + 1, i] = dec * out[k, i] + ca * phi[k, i] + cb * (phi[k + 1, i] - phi[k, i])
    return out_np


def rs_conv_path(object q_in, object lam_in, double h):
    cdef double[:, ::1] q = np.ascontiguousarray(q_in)
    cdef double[::1] lam = np.ascontiguousarray(lam_in)
    cdef Py_ssize_t ncells = q.shape[0], I = q.shape[1]
    out_np = np.zeros((ncells + 1, I))
    cdef double[:, ::1] out = out_np
    cdef Py_ssize_t k, i
    cdef double dec
    for i in range(I):
        dec = exp(-lam[i] * h)
        for k in range(1, ncells + 1):
            out[k, i] = dec * (out[k - 1, i] + q[k - 1, i])
    return out_np
