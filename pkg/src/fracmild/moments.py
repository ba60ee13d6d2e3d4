"""Product-integration moment tables for weakly singular kernels.

Every fractional-derivative quadrature in the package approximates the
data by its piecewise-linear interpolant on a uniform grid and integrates
the singular kernel exactly against it.  On a uniform grid the required
cell moments depend only on the lag index, so they are tabulated once per
(step, order, eigenvalue-vector) and reused.

Exponential moments  int e^(-lam s) s^p ds  over lag cells are computed by
composite Gauss-Legendre panels, subdividing each cell proportionally to
lam*h; this avoids the catastrophic cancellation an incomplete-gamma
difference would suffer when lam*h is small while staying accurate when
the exponential decays inside a single cell.  Cells with lam*j*h > 45
contribute below double precision and are set to zero.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammainc, gammaln

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def power_lag_moments(h: float, n: int, p: float) -> np.ndarray:
    """m[j] = int_{jh}^{(j+1)h} s^p ds for j = 0..n-1 (p > -1 required at j=0)."""
    j = np.arange(n, dtype=float)
    if p == -1.0:
        out = np.log(j + 1.0) - np.log(np.where(j > 0, j, 1.0))
        out[0] = np.inf
        return out
    edges = np.arange(n + 1, dtype=float) * h
    with np.errstate(divide="ignore"):
        prim = edges ** (p + 1.0) / (p + 1.0)
    out = np.diff(prim)
    if p <= -1.0:
        out[0] = np.inf
    return out


def _exp_power_cell(lam: float, a: float, b: float, p: float, n_sub: int) -> float:
    """int_a^b exp(-lam s) s^p ds by composite 8-point Gauss-Legendre."""
    edges = np.linspace(a, b, n_sub + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    s = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = np.exp(-lam * s) * s**p
    return float(np.sum(half[:, None] * _GL_WEIGHTS[None, :] * vals))


def exp_lag_moments(lam_vec: np.ndarray, h: float, n: int, p: float) -> np.ndarray:
    """m[i, j] = int_{jh}^{(j+1)h} exp(-lam_i s) s^p ds, j >= 1 (j=0 slot is 0).

    The j = 0 cell is singular for p <= -1 and is always handled separately
    by the callers (difference forms cancel the singularity there).
    """
    lam_vec = np.asarray(lam_vec, dtype=float)
    out = np.zeros((len(lam_vec), n))
    j = np.arange(n)
    for i, lam in enumerate(lam_vec):
        n_sub = int(min(16, max(1, np.ceil(lam * h))))
        dead = lam * j * h > 45.0
        for jj in range(1, n):
            if dead[jj]:
                break
            out[i, jj] = _exp_power_cell(lam, jj * h, (jj + 1) * h, p, n_sub)
    return out


def lower_inc_gamma_moment(lam_vec: np.ndarray, h: float, eta: float) -> np.ndarray:
    """m1cum[i] = int_0^h exp(-lam_i s) s^(-eta) ds  (finite for eta < 1)."""
    lam_vec = np.asarray(lam_vec, dtype=float)
    out = np.empty(len(lam_vec))
    a = 1.0 - eta
    for i, lam in enumerate(lam_vec):
        if lam * h < 1e-12:
            out[i] = h**a / a
        else:
            out[i] = np.exp(gammaln(a)) * gammainc(a, lam * h) * lam ** (-a)
    return out


def first_cell_difference_moment(lam_vec: np.ndarray, h: float, eta: float) -> np.ndarray:
    """g0[i] = int_0^h (1 - exp(-lam_i s)) s^(-1-eta) ds.

    Obtained by parts from the lower incomplete gamma moment; the two terms
    cancel only mildly (relative loss ~ eta) for small lam*h.
    """
    lam_vec = np.asarray(lam_vec, dtype=float)
    m1 = lower_inc_gamma_moment(lam_vec, h, eta)
    out = np.empty(len(lam_vec))
    for i, lam in enumerate(lam_vec):
        if lam == 0.0:
            out[i] = 0.0
        else:
            out[i] = -(h**-eta) * (-np.expm1(-lam * h)) / eta + lam * m1[i] / eta
    return out


class LeftTables:
    """Lag tables for the left-sided operator-path derivative of order eta."""

    def __init__(self, lam_vec: np.ndarray, h: float, n: int, eta: float):
        self.h = h
        self.eta = eta
        self.mu0 = power_lag_moments(h, n, -1.0 - eta)  # mu0[0] unused (inf)
        self.m0 = exp_lag_moments(lam_vec, h, n, -1.0 - eta)
        self.m1 = exp_lag_moments(lam_vec, h, n, -eta)
        self.m1cum = lower_inc_gamma_moment(lam_vec, h, eta)
        self.g0 = first_cell_difference_moment(lam_vec, h, eta)
        mu0_safe = self.mu0.copy()
        mu0_safe[0] = 0.0
        self.mu0_cumsum = np.cumsum(mu0_safe)  # sum_{j=1..J} mu0[j]


class RightTables:
    """Lag tables for the right-sided path derivative of order nu."""

    def __init__(self, h: float, n: int, nu: float):
        self.h = h
        self.nu = nu
        self.nu0 = power_lag_moments(h, n, -1.0 - nu)  # nu0[0] unused (inf)
        self.nu1 = power_lag_moments(h, n, -nu)


def outer_weight_moments(h: float, n: int, eta: float, offset: float = 0.0):
    """Moments of the weight (x - offset)^(-eta) against piecewise-linear data.

    Returns (w0, w1) with w0[m] = int_cell (x-offset)^(-eta) dx and
    w1[m] = int_cell (x-offset)^(-eta) (x - x_m) dx over cell
    [offset + m h, offset + (m+1) h].
    """
    edges = np.arange(n + 1, dtype=float) * h
    a = 1.0 - eta
    p0 = edges**a / a
    p1 = edges ** (a + 1.0) / (a + 1.0)
    w0 = np.diff(p0)
    w1 = np.diff(p1) - edges[:-1] * w0
    return w0, w1
