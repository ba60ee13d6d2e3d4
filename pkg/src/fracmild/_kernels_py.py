"""Pure NumPy implementations of the hot quadrature kernels.

These are the reference implementations; ``fracmild._fastkernels`` (Cython)
provides drop-in replacements selected by :mod:`fracmild.backend`.  All
functions operate on raw coefficient arrays over a uniform time grid and
use the lag-moment tables from :mod:`fracmild.moments`.

Shapes: N+1 grid points, I modes, J nodes.
``B``    (N+1, I, J): weighted-analysis operator of the multiplier path,
         B[m, i, j] = w_j e_i(x_j) g_j(t_m).
``zc``   (N+1, I): coefficient path of the integrator z.
``Psi``  (N+1, I, J): regularized left-derivative profile, see below.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND_NAME = "python"


def left_operator_profile(B: np.ndarray, h: float, eta: float, tables) -> np.ndarray:
    """Regularized left Marchaud profile of the operator path.

    Computes Psi[m] = B[m] + x_m^eta * eta * J[m] where J[m] is the
    difference integral int_0^{x_m} (B[m] - e^(-lam s) B(x_m - s)) s^(-1-eta) ds
    evaluated exactly for the piecewise-linear interpolant of B and the
    exact exponential factor.  The actual derivative of the operator path
    at x (up to the semigroup factor pulled out by the caller) is
    Psi[m] * x_m^(-eta) / Gamma(1-eta).
    """
    npts, n_modes, n_nodes = B.shape
    psi = np.empty_like(B)
    psi[0] = B[0]
    m1cum_h = (tables.m1cum / h)[:, None]
    dzB = B[:-1] - B[1:]  # dzB[l] = B[l] - B[l+1]
    for m in range(1, npts):
        acc = B[m] * (tables.g0 + tables.mu0_cumsum[m - 1])[:, None]
        acc -= (B[m - 1] - B[m]) * m1cum_h
        if m >= 2:
            j = np.arange(1, m)
            past = B[1:m][::-1]          # past[j-1] = B[m-j]
            diff = dzB[: m - 1][::-1]    # diff[j-1] = B[m-j-1] - B[m-j]
            m0 = tables.m0[:, 1:m]
            m1 = tables.m1[:, 1:m]
            acc -= np.einsum("kij,ik->ij", past, m0)
            acc -= np.einsum("kij,ik->ij", diff, (m1 - (j * h) * m0) / h)
        psi[m] = B[m] + ((m * h) ** eta * eta) * acc
    return psi


def right_derivative_table(zc: np.ndarray, h: float, nu: float, tables) -> np.ndarray:
    """Right-sided Marchaud derivatives for every target time.

    W[k, m] is the order-nu right derivative at x_m of the path regulated at
    t_k, for 0 <= m < k; W[k, k] = 0 (the regulated path vanishes there).
    The inner integrals accumulate incrementally in k, so the whole table
    costs O(N^2) per mode.
    """
    npts, n_modes = zc.shape
    pref = 1.0 / math.gamma(1.0 - nu)
    dz = np.diff(zc, axis=0)
    inner = np.zeros((npts, n_modes))
    w = np.zeros((npts, npts, n_modes))
    nu0, nu1 = tables.nu0, tables.nu1
    for k in range(1, npts):
        l = k - 1
        inner[l] += dz[l] * (nu1[0] / h)
        if l >= 1:
            j = np.arange(l, 0, -1)
            inner[:l] += (zc[l] - zc[:l]) * nu0[j][:, None]
            inner[:l] += dz[l] * ((nu1[j] - (j * h) * nu0[j]) / h)[:, None]
        lag = (np.arange(k, 0, -1) * h) ** (-nu)
        w[k, :k] = pref * ((zc[k] - zc[:k]) * lag[:, None] + nu * inner[:k])
    return w


def right_derivative_profile(zc: np.ndarray, h: float, nu: float, tables) -> np.ndarray:
    """Right derivative at every x_m for the single target t = last grid point."""
    npts, n_modes = zc.shape
    n = npts - 1
    pref = 1.0 / math.gamma(1.0 - nu)
    dz = np.diff(zc, axis=0)
    out = np.zeros((npts, n_modes))
    nu0, nu1 = tables.nu0, tables.nu1
    for m in range(n):
        inner = dz[m] * (nu1[0] / h)
        if m + 1 < n:
            l = np.arange(m + 1, n)
            j = l - m
            inner = inner + (nu0[j][:, None] * (zc[l] - zc[m])).sum(axis=0)
            inner = inner + (((nu1[j] - (j * h) * nu0[j]) / h)[:, None] * dz[l]).sum(axis=0)
        out[m] = pref * ((zc[n] - zc[m]) * ((n - m) * h) ** (-nu) + nu * inner)
    return out


def _last_cell_moments(h: float, eta: float):
    """Exact moments for the cell adjacent to the target time.

    On [t-h, t] the right derivative of a piecewise-linear integrator is
    exactly c (t-x)^eta, so the integrand is integrated there against that
    power instead of a chord.  Returns (beta0, beta1) for the k=1 cell
    where the x^(-eta) weight is also exact, and (p0, p1) for later cells
    where the weight is folded into the linear factor.
    """
    beta0 = h * math.gamma(1.0 - eta) * math.gamma(1.0 + eta)
    beta1 = h * math.gamma(2.0 - eta) * math.gamma(1.0 + eta) / 2.0
    p0 = h ** (1.0 + eta) / (1.0 + eta)
    p1 = h ** (1.0 + eta) / ((1.0 + eta) * (2.0 + eta))
    return beta0, beta1, p0, p1


def convolve_targets(
    psi: np.ndarray,
    w_table: np.ndarray,
    zc: np.ndarray,
    synth: np.ndarray,
    explag: np.ndarray,
    w0: np.ndarray,
    w1: np.ndarray,
    h: float,
    eta: float,
) -> np.ndarray:
    """Assemble the pathwise convolution integral at every grid time.

    out[k] = 1/Gamma(1-eta) * int_0^{t_k} x^(-eta) rho_k(x) dx with
    rho_k(x_m) = exp(-lam (t_k - x_m)) Psi[m] (synth^T W[k, m]).  Interior
    cells integrate x^(-eta) against piecewise-linear rho via (w0, w1);
    the cell adjacent to t_k carries the exact (t-x)^eta factor of the
    regulated derivative.
    """
    npts = psi.shape[0]
    n_modes = psi.shape[1]
    pref = 1.0 / math.gamma(1.0 - eta)
    ginv = 1.0 / math.gamma(1.0 + eta)
    beta0, beta1, p0, p1 = _last_cell_moments(h, eta)
    out = np.zeros((npts, n_modes))
    zdot_nodal = (np.diff(zc, axis=0) / h) @ synth  # (npts-1, J)
    for k in range(1, npts):
        vnod = w_table[k, :k] @ synth  # (k, J)
        y = np.einsum("mij,mj->mi", psi[:k], vnod)
        y *= explag[:, k:0:-1].T
        psi1 = ginv * (psi[k] @ zdot_nodal[k - 1])
        q_left = y[k - 1] / h**eta
        if k == 1:
            out[k] = pref * (q_left * beta0 + (psi1 - q_left) * beta1)
            continue
        slope = np.diff(y, axis=0) / h
        acc = (w0[: k - 1, None] * y[: k - 1] + w1[: k - 1, None] * slope).sum(axis=0)
        q0 = ((k - 1) * h) ** (-eta) * q_left
        q1 = (k * h) ** (-eta) * psi1
        out[k] = pref * (acc + q0 * p0 + (q1 - q0) * p1)
    return out


def convolve_single(
    psi: np.ndarray,
    w_profile: np.ndarray,
    zc: np.ndarray,
    synth: np.ndarray,
    explag: np.ndarray,
    w0: np.ndarray,
    w1: np.ndarray,
    h: float,
    eta: float,
) -> np.ndarray:
    """Single-target version of :func:`convolve_targets` (target = last point)."""
    npts = psi.shape[0]
    n = npts - 1
    pref = 1.0 / math.gamma(1.0 - eta)
    ginv = 1.0 / math.gamma(1.0 + eta)
    beta0, beta1, p0, p1 = _last_cell_moments(h, eta)
    vnod = w_profile[:n] @ synth
    y = np.einsum("mij,mj->mi", psi[:n], vnod)
    y *= explag[:, n:0:-1].T
    psi1 = ginv * (psi[n] @ (((zc[n] - zc[n - 1]) / h) @ synth))
    q_left = y[n - 1] / h**eta
    if n == 1:
        return pref * (q_left * beta0 + (psi1 - q_left) * beta1)
    slope = np.diff(y, axis=0) / h
    acc = (w0[: n - 1, None] * y[: n - 1] + w1[: n - 1, None] * slope).sum(axis=0)
    q0 = ((n - 1) * h) ** (-eta) * q_left
    q1 = (n * h) ** (-eta) * psi1
    return pref * (acc + q0 * p0 + (q1 - q0) * p1)


def _phi_pair(x: np.ndarray):
    """Stable (phi1, psi) = ((1-e^-x)/x, (1-e^-x (1+x))/x^2)."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-3
    xs = np.where(small, 1.0, x)
    em1 = -np.expm1(-xs)
    phi1 = np.where(small, 1.0 - x / 2.0 + x**2 / 6.0 - x**3 / 24.0, em1 / xs)
    psi = np.where(
        small,
        0.5 - x / 3.0 + x**2 / 8.0 - x**3 / 30.0,
        (1.0 - np.exp(-xs) * (1.0 + xs)) / xs**2,
    )
    return phi1, psi


def exp_conv_path(phi: np.ndarray, lam: np.ndarray, h: float) -> np.ndarray:
    """int_0^{t_k} e^(-lam (t_k - s)) phi(s) ds for all k, phi piecewise linear.

    Exact per cell for the interpolant (exponential-integrator weights);
    stable for lam = 0.
    """
    npts, n_modes = phi.shape
    x = lam * h
    phi1, psi = _phi_pair(x)
    c_a = h * phi1
    c_b = h * (phi1 - psi)
    decay = np.exp(-x)
    out = np.zeros_like(phi)
    for k in range(npts - 1):
        b = phi[k + 1] - phi[k]
        out[k + 1] = decay * out[k] + c_a * phi[k] + c_b * b
    return out


def rs_conv_path(q: np.ndarray, lam: np.ndarray, h: float) -> np.ndarray:
    """Left-point Riemann-Stieltjes sums I[k] = sum_{m<k} e^(-lam(k-m)h) q[m]."""
    n_cells, n_modes = q.shape
    out = np.zeros((n_cells + 1, n_modes))
    decay = np.exp(-lam * h)
    for k in range(1, n_cells + 1):
        out[k] = decay * (out[k - 1] + q[k - 1])
    return out
