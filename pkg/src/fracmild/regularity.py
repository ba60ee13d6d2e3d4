"""Regularity measurements on time paths.

Hölder exponents are estimated by log-log regression of the sup over a
fixed anchor set of norm increments against dyadic lags; keeping the
anchor count constant across lags makes the order statistic scale
homogeneously, so the regression slope is an unbiased exponent estimate
(a sup over all grid positions would drag a sqrt(log 1/h) factor into the
slope).  The W-seminorm quadrature reuses the product-integration scheme
of the fractional derivatives.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .ioutil import write_csv
from .spaces import Field, ParamSet, TimePath, norm_H


@dataclass
class SlopeEstimate:
    slope: float
    intercept: float
    r2: float
    stderr: float
    lags: np.ndarray
    values: np.ndarray
    degenerate: bool = False

    @property
    def band(self) -> tuple[float, float]:
        """~95% confidence band of the slope."""
        return (self.slope - 2.0 * self.stderr, self.slope + 2.0 * self.stderr)


def _weighted_fit(x, y, w) -> SlopeEstimate:
    x, y, w = (np.asarray(a, dtype=float) for a in (x, y, w))
    wn = w / w.sum()
    xm, ym = float(wn @ x), float(wn @ y)
    denom = float(wn @ (x - xm) ** 2)
    slope = float(wn @ ((x - xm) * (y - ym))) / denom
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    ss_tot = float(wn @ (y - ym) ** 2)
    r2 = 1.0 - float(wn @ resid**2) / ss_tot if ss_tot > 0 else 1.0
    n = len(x)
    stderr = math.sqrt(max(float(wn @ resid**2), 0.0) / max(n - 2, 1) / denom)
    return SlopeEstimate(slope, intercept, r2, stderr, np.exp(x), np.exp(y))


def dyadic_lags(n_steps: int, max_lag_frac: int = 32, min_lags: int = 6) -> list[int]:
    """Dyadic cell lags halving from n/max_lag_frac, grown until >= min_lags."""
    max_lag = max(2, n_steps // max_lag_frac)
    while True:
        lags, lag = [], max_lag
        while lag >= 2:
            lags.append(lag)
            lag //= 2
        if len(lags) >= min_lags or max_lag >= n_steps // 2:
            return lags
        max_lag *= 2


def sup_increment_slope(times, coeffs, normfn, max_lag_frac: int = 32, n_sets: int = 32,
                        min_lags: int = 6) -> SlopeEstimate:
    """Regression slope of log sup-increment statistics against dyadic lags.

    For each lag the statistic is the sup of ||v(s+h)-v(s)|| over an anchor
    set, log-averaged across ``n_sets`` interleaved sets whose spacing is
    the largest lag.  Each set contains the anchor s=0.  Keeping the anchor
    count per set fixed across lags makes the order statistic scale
    homogeneously in the lag (so fBm-type paths regress to their true
    exponent, without the sqrt(log) tilt of a global sup), while the shared
    zero anchor makes concave power paths t^g exact.  The fit is weighted by
    sqrt(n/lag), the effective sample count.
    """
    times = np.asarray(times, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    n = len(times) - 1
    lags = dyadic_lags(n, max_lag_frac, min_lags)
    if len(lags) < 3:
        raise ValueError("grid too short for lag regression")
    h = times[1] - times[0]
    spacing = lags[0]
    xs, ys, ws = [], [], []
    for lag in lags:
        log_sups = []
        for off in range(n_sets):
            a = np.arange(off * spacing // n_sets, n - lag + 1, spacing)
            if len(a) == 0 or a[0] != 0:
                a = np.concatenate([[0], a])
            d = coeffs[a + lag] - coeffs[a]
            sup = float(np.max(normfn(d)))
            if sup <= 0.0:
                est = SlopeEstimate(np.nan, np.nan, 0.0, np.inf, np.asarray(lags, float) * h, np.zeros(len(lags)))
                est.degenerate = True
                return est
            log_sups.append(math.log(sup))
        xs.append(math.log(lag * h))
        ys.append(float(np.mean(log_sups)))
        ws.append(math.sqrt(n / lag))
    return _weighted_fit(xs, ys, ws)


def holder_exponent(path: TimePath, delta: float, max_lag_frac: int = 32, n_sets: int = 32,
                    min_lags: int = 6) -> SlopeEstimate:
    """Estimated time-Hölder exponent of the path in the H^delta norm."""
    lam = path.basis.eigenvalues

    def normfn(d):
        l2 = np.sqrt(np.sum(d**2, axis=1))
        if delta == 0.0:
            return l2
        return l2 + np.sqrt(d**2 @ lam**delta)

    return sup_increment_slope(path.times, path.coeffs, normfn, max_lag_frac=max_lag_frac,
                               n_sets=n_sets, min_lags=min_lags)


@dataclass
class WGammaResult:
    value: float
    divergence_flag: bool
    coarse_value: float
    profile: np.ndarray = field(repr=False, default=None)


def wgamma_seminorm(
    path: TimePath,
    gamma: float,
    delta: float = 0.0,
    use_inf_norm: bool = False,
    check_divergence: bool = True,
) -> WGammaResult:
    """sup_t ( ||v(t)||_X + int_0^t ||v(t)-v(s)||_X (t-s)^(-gamma-1) ds ).

    X is H^delta (plus the nodal sup when ``use_inf_norm``).  A value that
    keeps growing when the grid is refined (equivalently, shrinks when the
    path is subsampled) is flagged divergent rather than raised.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0,1)")
    if len(path.times) < 32:
        raise ValueError("need at least 32 grid points")

    def compute(times, coeffs) -> tuple[float, np.ndarray]:
        npts = len(times)
        h = times[1] - times[0]
        lam = path.basis.eigenvalues

        def normvec(d):
            out = np.sqrt(np.sum(d**2, axis=-1))
            if delta != 0.0:
                out = out + np.sqrt(d**2 @ lam**delta)
            if use_inf_norm:
                out = out + np.max(np.abs(d @ path.basis.eigenvectors), axis=-1)
            return out

        edges = np.arange(npts, dtype=float) * h
        with np.errstate(divide="ignore"):
            pow0 = -(edges ** (-gamma)) / gamma
        nu0 = np.diff(pow0)
        nu1 = np.diff(edges ** (1.0 - gamma)) / (1.0 - gamma)
        nu0[0] = 0.0  # singular cell: paired with a vanishing c0
        profile = normvec(coeffs).copy()
        for k in range(1, npts):
            d = normvec(coeffs[k][None, :] - coeffs[: k + 1])
            j = np.arange(1, k + 1)
            dl = d[k - j]       # node at rho = j h
            dr = d[k - j + 1]   # node at rho = (j-1) h
            # linear in rho = t_k - s on the cell: d = c0 - (dr-dl)/h * rho
            c0 = dl + j * (dr - dl)
            c0[0] = 0.0  # equals d(t_k) exactly
            profile[k] += float(np.sum(c0 * nu0[j - 1] - (dr - dl) / h * nu1[j - 1]))
        return float(np.max(profile)), profile

    value, profile = compute(path.times, path.coeffs)
    coarse_value = value
    flag = False
    if check_divergence and (len(path.times) - 1) % 2 == 0:
        coarse_value, _ = compute(path.times[::2], path.coeffs[::2])
        flag = bool(value > 1.1 * coarse_value)
    return WGammaResult(value=value, divergence_flag=flag, coarse_value=coarse_value, profile=profile)


def uniform_bound(path: TimePath, params: ParamSet) -> float:
    """max_t ||u(t)||_{delta + 2 gamma}."""
    sigma = params.delta + 2.0 * params.gamma
    return float(max(norm_H(path.field(k), sigma) for k in range(len(path.times))))


@dataclass
class RegionDescription:
    alpha: float
    beta: float
    spectral_dim: float
    case_p_empty: bool
    case_p_gamma: tuple[float, float]
    case_p_delta: tuple[float, float]
    lowdim_empty: bool
    lowdim_delta: tuple[float, float]
    lowdim_gamma_intercept: float  # gamma < intercept - delta/2
    vertices_p: list
    vertices_lowdim: list

    def contains_P(self, gamma: float, delta: float) -> bool:
        return (
            not self.case_p_empty
            and self.case_p_gamma[0] < gamma < self.case_p_gamma[1]
            and self.case_p_delta[0] < delta < self.case_p_delta[1]
        )

    def contains_lowdim(self, gamma: float, delta: float) -> bool:
        return (
            not self.lowdim_empty
            and self.lowdim_delta[0] <= delta < self.lowdim_delta[1]
            and self.alpha < gamma < self.lowdim_gamma_intercept - delta / 2.0
        )

    def to_csv(self, path):
        rows = []
        for case, verts in (("P", self.vertices_p), ("lowdim", self.vertices_lowdim)):
            for i, (g, d) in enumerate(verts):
                rows.append([case, str(i), g, d])
        write_csv(path, ["case", "vertex", "gamma", "delta"], rows)


def admissible_region(alpha: float, beta: float, spectral_dim: float) -> RegionDescription:
    """(gamma, delta) regions of the two admissibility conditions.

    Standard case: delta in (beta, min(d_S/2, 1)), gamma in (0, gamma_max)
    with gamma_max = 1 - alpha - beta/2 - d_S/4 (empty exactly when
    d_S >= 4 (1 - alpha - beta/2) or the delta interval collapses).
    Low-dimension case: d_S/2 <= beta <= delta < 1 with
    alpha < gamma < 1 - alpha - beta/2 - delta/2.
    """
    gmax = 1.0 - alpha - beta / 2.0 - spectral_dim / 4.0
    dmax = min(spectral_dim / 2.0, 1.0)
    p_empty = not (0.0 < beta < dmax) or gmax <= 0.0
    verts_p = []
    if not p_empty:
        verts_p = [(0.0, beta), (gmax, beta), (gmax, dmax), (0.0, dmax)]

    c = 1.0 - alpha - beta / 2.0
    low_ok = spectral_dim / 2.0 <= beta < 1.0 and 0.0 < alpha
    delta_hi = min(1.0, 2.0 * (c - alpha))  # gamma window nonempty below this
    low_empty = not low_ok or delta_hi <= beta
    verts_low = []
    if not low_empty:
        verts_low = [(alpha, beta), (c - beta / 2.0, beta)]
        if delta_hi < 1.0:
            verts_low.append((alpha, delta_hi))
        else:
            verts_low += [(c - 0.5, 1.0), (alpha, 1.0)]
    return RegionDescription(
        alpha=alpha,
        beta=beta,
        spectral_dim=spectral_dim,
        case_p_empty=p_empty,
        case_p_gamma=(0.0, max(gmax, 0.0)),
        case_p_delta=(beta, dmax),
        lowdim_empty=low_empty,
        lowdim_delta=(beta, min(1.0, delta_hi)),
        lowdim_gamma_intercept=c,
        vertices_p=verts_p,
        vertices_lowdim=verts_low,
    )


@dataclass
class RegularityReport:
    holder_slope: float
    holder_band: tuple[float, float]
    holder_r2: float
    wgamma_seminorm: float
    wgamma_divergent: bool
    uniform_bound: float
    lemma_constants: dict
    params: dict

    def to_json(self, path=None) -> str:
        doc = json.dumps(asdict(self), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(doc)
        return doc


def measure_lemma_bounds(sol, z, params: ParamSet, n_pairs: int = 12, n_probes: int = 4,
                         nu: float = 0.5, seed: int = 0) -> dict:
    """Measured constants of the three a-priori bounds.

    For sampled windows (s,t): the reaction convolution obeys
    ||int_s^t T(t-x) F(u) dx||_delta <= C ||u||_W (t-s); the noise
    convolution obeys ||...||_delta <= C (t-s)^gamma; and the two-time
    operator difference obeys the (t-x)^(-delta/2-beta/2-nu) (x-y)^nu bound.
    Window values come from the semigroup factorization
    int_s^t = int_0^t - T(t-s) int_0^s, exact per mode.
    """
    from . import backend as kern
    from .solver import _StochasticConvolver, _nonlinearity_coeff_path

    path = sol.path
    basis = path.basis
    h = path.dt
    n = path.n_steps
    theta = sol.meta.get("theta", 1.0)
    lam_eff = basis.eigenvalues**theta
    rng = np.random.default_rng(seed)

    wg = wgamma_seminorm(path, params.gamma, params.delta, use_inf_norm=True).value

    nl = sol.meta.get("nonlinearity")
    ratios = {"lemma_F": 0.0, "lemma_T_diff": 0.0, "lemma_G": 0.0}
    det_path = None
    if nl is not None and not nl.F.is_zero():
        phi = _nonlinearity_coeff_path(path.coeffs, basis, nl.F)
        det_path = kern.exp_conv_path(phi, lam_eff, h)
    sto_path = None
    z_list = z if isinstance(z, list) else [z]
    if nl is not None and any(np.any(zz.coeffs) for zz in z_list):
        conv = _StochasticConvolver(
            basis, z_list, sol.meta["eta"], lam_eff, h, n, sol.meta.get("route", "definitional"), kern
        )
        u_nodal = path.coeffs @ basis.eigenvectors
        sto_path = conv.sweep([g(u_nodal) for g in nl.g_list()])

    # windows drawn as time fractions so refined grids sample the same spots
    pairs = []
    for _ in range(n_pairs):
        fa, fb = np.sort(rng.uniform(0.0, 1.0, size=2))
        s_idx = int(round(fa * n))
        t_idx = max(int(round(fb * n)), s_idx + 2)
        if t_idx > n:
            s_idx, t_idx = n - 2, n
        pairs.append((s_idx, t_idx))

    lamd = basis.eigenvalues ** params.delta

    def norm_delta(c):
        return float(np.sqrt(np.sum(c**2)) + np.sqrt(np.sum(lamd * c**2)))

    for s_idx, t_idx in pairs:
        dt_win = (t_idx - s_idx) * h
        decay = np.exp(-lam_eff * dt_win)
        if det_path is not None:
            win = det_path[t_idx] - decay * det_path[s_idx]
            ratios["lemma_F"] = max(ratios["lemma_F"], norm_delta(win) / (wg * dt_win))
        if sto_path is not None:
            win = sto_path[t_idx] - decay * sto_path[s_idx]
            ratios["lemma_G"] = max(ratios["lemma_G"], norm_delta(win) / dt_win**params.gamma)

    if nl is not None:
        g0 = nl.g_list()[0]
        wmb = (1.0 + basis.eigenvalues) ** (-params.beta)
        for _ in range(n_pairs):
            fy, fx, ft = np.sort(rng.uniform(0.0, 1.0, size=3))
            t_idx = max(int(round(ft * n)), 4)
            x_idx = min(max(int(round(fx * n)), 1), t_idx - 2)
            y_idx = min(int(round(fy * n)), x_idx - 1) if x_idx >= 1 else 0
            y_idx = max(y_idx, 0)
            t, x, y = (idx * h for idx in (t_idx, x_idx, y_idx))
            gx = g0(path.coeffs[x_idx] @ basis.eigenvectors)
            for _ in range(n_probes):
                w = rng.standard_normal(basis.n_modes)
                w /= math.sqrt(float(np.sum(wmb * w**2)))
                gw = basis.analysis_matrix() @ (gx * (w @ basis.eigenvectors))
                diff = (np.exp(-lam_eff * (t - x)) - np.exp(-lam_eff * (t - y))) * gw
                rhs = wg * (t - x) ** (-params.delta / 2.0 - params.beta / 2.0 - nu) * (x - y) ** nu
                ratios["lemma_T_diff"] = max(ratios["lemma_T_diff"], norm_delta(diff) / rhs)
    ratios["nu"] = nu
    ratios["q2_proxy"] = True
    return ratios


def build_report(sol, z, params: ParamSet, lemma_kwargs=None) -> RegularityReport:
    est = holder_exponent(sol.path, params.delta)
    wg = wgamma_seminorm(sol.path, params.gamma, params.delta, use_inf_norm=True)
    ub = uniform_bound(sol.path, params)
    lemmas = measure_lemma_bounds(sol, z, params, **(lemma_kwargs or {}))
    return RegularityReport(
        holder_slope=est.slope,
        holder_band=est.band,
        holder_r2=est.r2,
        wgamma_seminorm=wg.value,
        wgamma_divergent=wg.divergence_flag,
        uniform_bound=ub,
        lemma_constants=lemmas,
        params={
            "alpha": params.alpha, "beta": params.beta, "gamma": params.gamma,
            "delta": params.delta, "spectral_dim": params.spectral_dim,
            "hurst": params.hurst, "theta": params.theta, "t0": params.t0,
        },
    )
