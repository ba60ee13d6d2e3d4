import json
import math
import warnings

import numpy as np
import pytest

from fracmild.errors import HolderWarning
from fracmild.noise import SeriesNoiseSpec, gen_series_noise
from fracmild.regularity import (
    RegularityReport,
    admissible_region,
    build_report,
    holder_exponent,
    measure_lemma_bounds,
    sup_increment_slope,
    uniform_bound,
    wgamma_seminorm,
)
from fracmild.solver import Nonlinearity, solve_mild
from fracmild.spaces import Field, ParamSet, TimePath, mode_field
from fracmild.spectral import build_interval_basis


@pytest.fixture(scope="module")
def basis():
    return build_interval_basis(8, 64)


def power_path(basis, exponent, n=256, amplitude=1.0):
    times = np.linspace(0.0, 1.0, n + 1)
    coeffs = np.zeros((n + 1, basis.n_modes))
    coeffs[:, 0] = amplitude * times**exponent
    return TimePath(times, coeffs, basis)


# ------------------------------------------------------------- W seminorm

def test_wgamma_constant_path(basis):
    n = 64
    path = TimePath(np.linspace(0, 1, n + 1), np.tile(mode_field(basis, 0).coeffs, (n + 1, 1)), basis)
    res = wgamma_seminorm(path, gamma=0.5)
    assert res.value == pytest.approx(1.0, abs=1e-12)
    assert not res.divergence_flag


def test_wgamma_linear_path_closed_form(basis):
    # v(t) = t e_1 in the L2 norm: sup_t (t + int_0^t (t-s)^(-1/2) ds) = t0 + 2 sqrt(t0)
    path = power_path(basis, 1.0)
    res = wgamma_seminorm(path, gamma=0.5)
    assert res.value == pytest.approx(1.0 + 2.0, rel=1e-9)


def test_wgamma_subcritical_power_diverges(basis):
    # t^(0.3) measured at gamma = 0.5: the sup grows under refinement
    vals = {}
    for n in (128, 256, 512):
        res = wgamma_seminorm(power_path(basis, 0.3, n=n), gamma=0.5)
        vals[n] = res.value
        assert res.divergence_flag
    assert vals[512] > vals[256] > vals[128]


def test_wgamma_monotone_in_gamma(basis):
    rng = np.random.default_rng(0)
    n = 128
    coeffs = np.cumsum(rng.standard_normal((n + 1, 8)), axis=0) / n
    coeffs[0] = 0
    path = TimePath(np.linspace(0, 1, n + 1), coeffs, basis)
    vals = [wgamma_seminorm(path, g).value for g in (0.2, 0.35, 0.5, 0.65)]
    assert np.all(np.diff(vals) >= 0)


def test_wgamma_requires_min_grid(basis):
    with pytest.raises(ValueError):
        wgamma_seminorm(power_path(basis, 1.0, n=16), gamma=0.5)


# --------------------------------------------------------- Hölder exponent

def test_holder_power_paths_recovered(basis):
    for g in (0.2, 0.4, 0.6, 0.8):
        est = holder_exponent(power_path(basis, g, n=512), delta=0.0)
        assert est.slope == pytest.approx(g, abs=0.02)
        assert est.r2 > 0.999


def test_holder_semigroup_path_lipschitz(basis):
    # T(t) e_1 away from zero is C^1; measured on [t0/4, t0] with lags small
    # against 1/lambda_1 the slope sits in the Lipschitz regime
    lam = basis.eigenvalues[0]
    times = np.linspace(0.25, 1.25, 2049)
    coeffs = np.zeros((2049, 8))
    coeffs[:, 0] = np.exp(-lam * times)
    path = TimePath(times - 0.25, coeffs, basis)
    est = holder_exponent(path, delta=0.45, max_lag_frac=128, min_lags=5)
    assert est.slope == pytest.approx(1.0, abs=0.05)


def test_holder_degenerate_path(basis):
    path = TimePath(np.linspace(0, 1, 129), np.zeros((129, 8)), basis)
    est = holder_exponent(path, delta=0.0)
    assert est.degenerate


def test_holder_band_is_reported(basis):
    est = holder_exponent(power_path(basis, 0.6, n=512), delta=0.0)
    lo, hi = est.band
    assert lo <= est.slope <= hi


# ------------------------------------------------------- admissible region

def test_region_standard_case_worked_values():
    reg = admissible_region(alpha=0.1, beta=0.2, spectral_dim=1.0)
    assert not reg.case_p_empty
    assert reg.case_p_gamma == pytest.approx((0.0, 0.55))
    assert reg.case_p_delta == pytest.approx((0.2, 0.5))


def test_region_high_dimension_empty():
    reg = admissible_region(alpha=0.05, beta=0.1, spectral_dim=4.0)
    assert reg.case_p_empty  # 1 - alpha - beta/2 - 1 <= 0 needs alpha + beta/2 < 0


def test_region_lowdim_worked_values():
    reg = admissible_region(alpha=0.1, beta=0.5, spectral_dim=1.0)
    assert not reg.lowdim_empty
    assert reg.lowdim_gamma_intercept == pytest.approx(0.65)
    assert reg.contains_lowdim(0.39, 0.5)
    assert not reg.contains_lowdim(0.41, 0.5)


def test_region_boundary_algebra_sweep():
    # standard region empty exactly when d_S >= 4 (1 - alpha - beta/2)
    rng = np.random.default_rng(1)
    for _ in range(200):
        alpha = rng.uniform(0.01, 0.5)
        d_s = rng.uniform(0.2, 4.5)
        beta = rng.uniform(0.01, min(d_s / 2.0, 1.0) - 1e-6)
        reg = admissible_region(alpha, beta, d_s)
        assert reg.case_p_empty == (d_s >= 4.0 * (1.0 - alpha - beta / 2.0))


def test_region_nesting_property():
    # if (gamma, delta) is admissible then so is any smaller pair above beta
    reg = admissible_region(alpha=0.1, beta=0.2, spectral_dim=1.0)
    rng = np.random.default_rng(2)
    for _ in range(100):
        g = rng.uniform(0.01, 0.549)
        d = rng.uniform(0.201, 0.499)
        if reg.contains_P(g, d):
            g2 = rng.uniform(0.005, g)
            d2 = rng.uniform(0.2001, d)
            assert reg.contains_P(g2, d2)


def test_region_csv_vertices(tmp_path):
    reg = admissible_region(alpha=0.1, beta=0.2, spectral_dim=1.0)
    out = tmp_path / "region.csv"
    reg.to_csv(out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "case,vertex,gamma,delta"
    assert len(lines) > 4


# ------------------------------------------------------------ lemma bounds

@pytest.fixture(scope="module")
def solved(basis):
    params = ParamSet.for_basis(basis, alpha=0.21, beta=0.35, gamma=0.3, delta=0.45, hurst=0.8, t0=1.0)
    spec = SeriesNoiseSpec(law="power", rho=0.2, beta_star=0.3, n_terms=8, hurst=0.8)
    z = gen_series_noise(spec, basis, 128, 1.0, seed=0)
    f = Field(0.25 / (1 + np.arange(1, 9)) ** 2, basis)
    nl = Nonlinearity.saturating(1.0, 1.0, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HolderWarning)
        sol = solve_mild(f, nl, z, params, tol=1e-8)
    return sol, z, params


def test_lemma_bounds_zero_terms(basis):
    params = ParamSet.for_basis(basis, alpha=0.21, beta=0.35, gamma=0.3, delta=0.45, hurst=0.8, t0=1.0)
    spec = SeriesNoiseSpec(law="power", rho=0.2, beta_star=0.3, n_terms=8, hurst=0.8)
    z = gen_series_noise(spec, basis, 128, 1.0, seed=1)
    f = Field(0.25 / (1 + np.arange(1, 9)) ** 2, basis)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HolderWarning)
        sol = solve_mild(f, Nonlinearity(Nonlinearity.zero().F, Nonlinearity.linear().G), z, params, tol=1e-8)
        ratios = measure_lemma_bounds(sol, z, params)
    assert ratios["lemma_F"] == 0.0  # F absent
    from fracmild.noise import zero_noise
    z0 = zero_noise(basis, 128, 1.0)
    sol2 = solve_mild(f, Nonlinearity(Nonlinearity.linear().F, Nonlinearity.zero().G), z0, params, tol=1e-8)
    ratios2 = measure_lemma_bounds(sol2, z0, params)
    assert ratios2["lemma_G"] == 0.0  # G absent


def test_lemma_bounds_finite_and_stable(solved, basis):
    sol, z, params = solved
    r1 = measure_lemma_bounds(sol, z, params, n_pairs=16, seed=3)
    for key in ("lemma_F", "lemma_T_diff", "lemma_G"):
        assert np.isfinite(r1[key]) and r1[key] >= 0.0
    # refinement stability on one coupled path: the fine grid carries the
    # same noise sample, the coarse solve sees its restriction
    from fracmild.noise import subsample

    spec = SeriesNoiseSpec(law="power", rho=0.2, beta_star=0.3, n_terms=8, hurst=0.8)
    z_fine = gen_series_noise(spec, basis, 256, 1.0, seed=0)
    z_coarse = subsample(z_fine, 2)
    f = Field(0.25 / (1 + np.arange(1, 9)) ** 2, basis)
    nl = Nonlinearity.saturating(1.0, 1.0, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HolderWarning)
        sol_f = solve_mild(f, nl, z_fine, params, tol=1e-8)
        sol_c = solve_mild(f, nl, z_coarse, params, tol=1e-8)
        r_f = measure_lemma_bounds(sol_f, z_fine, params, n_pairs=16, seed=3)
        r_c = measure_lemma_bounds(sol_c, z_coarse, params, n_pairs=16, seed=3)
    for key in ("lemma_F", "lemma_G"):
        assert abs(r_f[key] - r_c[key]) <= 0.2 * max(r_f[key], r_c[key])


def test_uniform_bound_and_report(solved):
    sol, z, params = solved
    assert np.isfinite(uniform_bound(sol.path, params))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HolderWarning)
        rep = build_report(sol, z, params)
    doc = json.loads(rep.to_json())
    assert set(doc) >= {"holder_slope", "wgamma_seminorm", "uniform_bound", "lemma_constants"}
    assert np.isfinite(doc["holder_slope"]) and np.isfinite(doc["wgamma_seminorm"])
    assert doc["holder_band"][0] < doc["holder_slope"] < doc["holder_band"][1]


def test_report_json_file(tmp_path, solved):
    sol, z, params = solved
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HolderWarning)
        rep = build_report(sol, z, params)
    out = tmp_path / "report.json"
    rep.to_json(out)
    assert json.loads(out.read_text())["params"]["alpha"] == params.alpha
