import math
import warnings

import numpy as np
import pytest

from fracmild import backend
from fracmild.errors import AdmissibilityError, HolderWarning, NonlinearityEvalError
from fracmild.noise import NoisePath, SeriesNoiseSpec, gen_series_noise, zero_noise
from fracmild.solver import (
    Nonlinearity,
    ScalarFunc,
    apply_nonlinearity,
    deterministic_convolution,
    export_solution_csv,
    solve_mild,
    solve_with_fractional_dissipation,
    _picard_on_grid,
)
from fracmild.spaces import Field, ParamSet, TimePath, mode_field, norm_H_inf
from fracmild.spectral import SpectralBasis, build_interval_basis


def toy_flat_basis(lam=(2.0, 5.0)):
    nodes = np.arange(4.0)
    w = np.full(4, 0.25)
    vecs = np.array([[1.0, 1.0, 1.0, 1.0], [1.0, -1.0, 1.0, -1.0]])
    return SpectralBasis(
        kind="toy", eigenvalues=np.asarray(lam, float), eigenvectors=vecs,
        nodes=nodes, weights=w, hausdorff_dim=1.0, walk_dim=2.0,
    )


@pytest.fixture(scope="module")
def interval():
    return build_interval_basis(8, 64)


def std_params(basis, **kw):
    defaults = dict(alpha=0.21, beta=0.35, gamma=0.3, delta=0.45, hurst=0.8, t0=1.0)
    defaults.update(kw)
    return ParamSet.for_basis(basis, **defaults)


# ------------------------------------------------------------ nonlinearity

def test_scalar_funcs_vanish_at_zero():
    for fn in (ScalarFunc("zero"), ScalarFunc("linear", 2.0), ScalarFunc("saturating", 1.5, 2.0)):
        assert float(fn(np.array(0.0))) == 0.0
        assert fn.validate_bounds()


def test_apply_nonlinearity_linear_identity(interval):
    nl = Nonlinearity.linear(1.0, 1.0)
    u = Field(0.3 / (1 + np.arange(1, 9)) ** 2, interval)
    out = apply_nonlinearity(nl, u, "F")
    assert np.abs(out.coeffs - u.coeffs).max() < 1e-10


def test_apply_nonlinearity_zero(interval):
    nl = Nonlinearity.zero()
    u = Field(np.random.default_rng(0).standard_normal(8), interval)
    assert np.all(apply_nonlinearity(nl, u, "F").coeffs == 0.0)


def test_apply_nonlinearity_small_field_taylor(interval):
    # odd saturating map: f(x) = x - x^3/3 + O(x^5), so f(eps e_1) = eps e_1 + O(eps^3)
    nl = Nonlinearity.saturating(1.0, 1.0, scale=1.0)
    eps = 1e-3
    u = mode_field(interval, 0, eps)
    out = apply_nonlinearity(nl, u, "G")
    err = np.abs(out.coeffs - u.coeffs).max()
    assert err < 5.0 * eps**3


def test_apply_nonlinearity_nan_reports_node(interval):
    u = Field(np.full(8, np.nan), interval)
    nl = Nonlinearity.linear(1.0, 1.0)
    with pytest.raises(NonlinearityEvalError) as exc:
        apply_nonlinearity(nl, u, "F")
    assert exc.value.node_index is not None


# --------------------------------------------------- deterministic convolution

def test_det_conv_zero(interval):
    path = TimePath(np.linspace(0, 1, 65), np.zeros((65, 8)), interval)
    out = deterministic_convolution(path, Nonlinearity.zero(), 1.0)
    assert np.all(out.coeffs == 0.0)


def test_det_conv_constant_mode(interval):
    # u constant e_1, F identity: mode-1 value (1 - exp(-lam t))/lam
    n = 64
    path = TimePath(np.linspace(0, 1, n + 1), np.tile(mode_field(interval, 0).coeffs, (n + 1, 1)), interval)
    nl = Nonlinearity.linear(1.0, 0.0)
    lam = interval.eigenvalues[0]
    for t in (0.25, 1.0):
        out = deterministic_convolution(path, nl, t)
        assert out.coeffs[0] == pytest.approx((1 - math.exp(-lam * t)) / lam, rel=1e-10)


def test_det_conv_matches_refined_trapezoid(interval):
    # oracle: trapezoid rule on a 64x finer grid with exact kernel values
    # (the trapezoid error itself is O(h^2 lambda) on the stiff modes)
    rng = np.random.default_rng(1)
    n = 64
    times = np.linspace(0, 1, n + 1)
    coeffs = np.cumsum(rng.standard_normal((n + 1, 8)), axis=0) / n
    path = TimePath(times, coeffs, interval)
    nl = Nonlinearity.saturating(1.0, 0.0, 1.0)
    out = deterministic_convolution(path, nl, 1.0)

    fine = np.linspace(0, 1, 64 * n + 1)
    interp = np.empty((len(fine), 8))
    for i in range(8):
        interp[:, i] = np.interp(fine, times, coeffs[:, i])
    nodal = nl.F(interp @ interval.eigenvectors)
    phi = nodal @ interval.analysis_matrix().T
    lam = interval.eigenvalues
    kern = np.exp(-np.outer(1.0 - fine, lam))
    integrand = kern * phi
    oracle = np.trapz(integrand, fine, axis=0)
    assert np.abs(out.coeffs - oracle).max() < 1e-6


# ------------------------------------------------------------------ solver

def test_solve_rejects_inadmissible(interval):
    bad = std_params(interval, alpha=0.4, gamma=0.45)  # gamma_max = 0.2325 < gamma
    z = zero_noise(interval, 64, 1.0)
    with pytest.raises(AdmissibilityError):
        solve_mild(mode_field(interval, 0), Nonlinearity.zero(), z, bad)


def test_solve_zero_case_is_semigroup(interval):
    params = std_params(interval)
    z = zero_noise(interval, 128, 1.0)
    f = Field(0.5 / (1 + np.arange(1, 9)) ** 2, interval)
    sol = solve_mild(f, Nonlinearity.zero(), z, params, tol=1e-12)
    tf = np.exp(-np.outer(sol.path.times, interval.eigenvalues)) * f.coeffs[None, :]
    assert np.abs(sol.path.coeffs - tf).max() == 0.0
    assert sol.picard_iterations == 1 and sol.converged


def test_solve_linear_reaction_closed_form(interval):
    # per-mode ODE du = (slope - lam) u dt: u_i(t) = exp((slope-lam_i) t) f_i
    params = std_params(interval, t0=0.25)
    z = zero_noise(interval, 512, 0.25)
    f = mode_field(interval, 0)
    nl = Nonlinearity(ScalarFunc("linear", 1.0), ScalarFunc("zero"))
    sol = solve_mild(f, nl, z, params, tol=1e-12, max_iter=60)
    exact = np.exp((1.0 - interval.eigenvalues[0]) * sol.path.times)
    assert np.abs(sol.path.coeffs[:, 0] - exact).max() < 1e-6
    assert sol.converged


def test_solve_multiplicative_voc_closed_form():
    # flat mode + G(u) = u + z = t e_0 gives da/dt = (1 - lam) a on the toy basis
    basis = toy_flat_basis()
    params = ParamSet.for_basis(basis, alpha=0.2, beta=0.3, gamma=0.35, delta=0.45, t0=1.0)
    n = 512
    times = np.linspace(0, 1, n + 1)
    coeffs = np.zeros((n + 1, 2))
    coeffs[:, 0] = times
    z = NoisePath(times=times, coeffs=coeffs, basis=basis)
    nl = Nonlinearity(ScalarFunc("zero"), ScalarFunc("linear", 1.0))
    sol = solve_mild(mode_field(basis, 0), nl, z, params, tol=1e-10, max_iter=60, check_noise_holder=False)
    exact = np.exp((1.0 - basis.eigenvalues[0]) * times)
    assert np.abs(sol.path.coeffs[:, 0] - exact).max() < 1e-4
    assert np.abs(sol.path.coeffs[:, 1]).max() == 0.0


def test_solve_contraction_history_decreasing(interval):
    params = std_params(interval)
    spec = SeriesNoiseSpec(law="power", rho=0.2, beta_star=0.3, n_terms=8, hurst=0.8)
    z = gen_series_noise(spec, interval, 128, 1.0, seed=0)
    f = Field(0.25 / (1 + np.arange(1, 9)) ** 2, interval)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HolderWarning)
        sol = solve_mild(f, Nonlinearity.saturating(1.0, 1.0, 1.0), z, params, tol=1e-9)
    h = sol.contraction_history
    assert sol.converged
    assert np.all(np.diff(h[1:]) < 0.0)  # strictly decreasing after first iterate


def test_solve_uniqueness_across_initializations(interval):
    params = std_params(interval)
    spec = SeriesNoiseSpec(law="power", rho=0.2, beta_star=0.3, n_terms=8, hurst=0.8)
    z = gen_series_noise(spec, interval, 128, 1.0, seed=1)
    f = Field(0.25 / (1 + np.arange(1, 9)) ** 2, interval)
    nl = Nonlinearity.saturating(1.0, 1.0, 1.0)
    tol = 1e-9
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HolderWarning)
        s1 = solve_mild(f, nl, z, params, tol=tol, init="semigroup")
        s2 = solve_mild(f, nl, z, params, tol=tol, init="constant")
    diffs = [
        norm_H_inf(Field(s1.path.coeffs[k] - s2.path.coeffs[k], interval), params.delta)
        for k in range(0, 129, 16)
    ]
    assert max(diffs) < 10.0 * tol


def test_solve_window_concatenation_matches_whole(interval):
    # the mild flow property: solving two half-windows and restarting at the
    # junction reproduces the whole-interval fixed point
    params = std_params(interval)
    spec = SeriesNoiseSpec(law="power", rho=0.2, beta_star=0.3, n_terms=8, hurst=0.8)
    z = gen_series_noise(spec, interval, 128, 1.0, seed=2)
    f = Field(0.25 / (1 + np.arange(1, 9)) ** 2, interval)
    nl = Nonlinearity.saturating(1.0, 1.0, 1.0)
    gfn = nl.g_list()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HolderWarning)
        whole, _, conv_w = _picard_on_grid(
            f.coeffs, nl, gfn, [z], params, 0, 128, 1e-10, 40, 0.255, "definitional", 1.0, "semigroup", backend
        )
        left, _, conv_a = _picard_on_grid(
            f.coeffs, nl, gfn, [z], params, 0, 64, 1e-10, 40, 0.255, "definitional", 1.0, "semigroup", backend
        )
        right, _, conv_b = _picard_on_grid(
            left[-1], nl, gfn, [z], params, 64, 128, 1e-10, 40, 0.255, "definitional", 1.0, "semigroup", backend
        )
    assert conv_w and conv_a and conv_b
    glued = np.vstack([left, right[1:]])
    rel = np.abs(glued - whole).max() / np.abs(whole).max()
    assert rel < 2e-3  # windowed quadrature differs from whole-interval at grid error level


def test_solve_nonconvergence_report(interval):
    params = std_params(interval)
    spec = SeriesNoiseSpec(law="power", rho=0.2, beta_star=0.3, n_terms=8, hurst=0.8)
    z = gen_series_noise(spec, interval, 64, 1.0, seed=3)
    f = Field(0.25 / (1 + np.arange(1, 9)) ** 2, interval)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HolderWarning)
        sol = solve_mild(
            f, Nonlinearity.saturating(1.0, 1.0, 1.0), z, params,
            tol=1e-14, max_iter=2, window_fallback=False,
        )
    assert not sol.converged
    assert len(sol.contraction_history) == 2  # report, not an exception


def test_solve_grid_consistency_checks(interval):
    params = std_params(interval)
    z = zero_noise(interval, 64, 1.0)
    f = mode_field(interval, 0)
    with pytest.raises(ValueError):
        solve_mild(f, Nonlinearity.zero(), z, params, n_time=128)
    z_bad = zero_noise(interval, 64, 2.0)
    with pytest.raises(ValueError):
        solve_mild(f, Nonlinearity.zero(), z_bad, params)


def test_fractional_dissipation_reduction_bitwise(interval):
    params = std_params(interval)
    spec = SeriesNoiseSpec(law="power", rho=0.2, beta_star=0.3, n_terms=8, hurst=0.8)
    z = gen_series_noise(spec, interval, 128, 1.0, seed=4)
    f = Field(0.25 / (1 + np.arange(1, 9)) ** 2, interval)
    nl = Nonlinearity.saturating(1.0, 1.0, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HolderWarning)
        s1 = solve_mild(f, nl, z, params, tol=1e-9)
        s2 = solve_with_fractional_dissipation(f, nl, z, params, theta=1.0, tol=1e-9)
    assert np.array_equal(s1.path.coeffs, s2.path.coeffs)


def test_fractional_dissipation_half_power_semigroup(interval):
    params = std_params(interval)
    z = zero_noise(interval, 64, 1.0)
    f = Field(0.5 / (1 + np.arange(1, 9)) ** 2, interval)
    sol = solve_with_fractional_dissipation(f, Nonlinearity.zero(), z, params, theta=0.5)
    expected = np.exp(-np.outer(sol.path.times, np.sqrt(interval.eigenvalues))) * f.coeffs[None, :]
    assert np.abs(sol.path.coeffs - expected).max() < 1e-14


def test_fractional_dissipation_full_run_converges(interval):
    params = std_params(interval, theta=0.5)
    spec = SeriesNoiseSpec(law="power", rho=0.2, beta_star=0.3, n_terms=8, hurst=0.8)
    z = gen_series_noise(spec, interval, 128, 1.0, seed=5)
    f = Field(0.25 / (1 + np.arange(1, 9)) ** 2, interval)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HolderWarning)
        sol = solve_with_fractional_dissipation(
            f, Nonlinearity.saturating(1.0, 1.0, 1.0), z, params, theta=0.5, tol=1e-8
        )
    assert sol.converged
    ratios = sol.contraction_ratios()
    assert np.max(ratios[1:]) < 1.0


def test_multiple_noise_terms_sum(interval):
    # linearity: two noise terms with linear G equal one summed path
    params = std_params(interval)
    spec = SeriesNoiseSpec(law="power", rho=0.2, beta_star=0.3, n_terms=8, hurst=0.8)
    z1 = gen_series_noise(spec, interval, 128, 1.0, seed=6)
    z2 = gen_series_noise(spec, interval, 128, 1.0, seed=7)
    z_sum = NoisePath(times=z1.times.copy(), coeffs=z1.coeffs + z2.coeffs, basis=interval)
    f = Field(0.1 / (1 + np.arange(1, 9)) ** 2, interval)
    nl_two = Nonlinearity(ScalarFunc("zero"), [ScalarFunc("linear", 1.0), ScalarFunc("linear", 1.0)])
    nl_one = Nonlinearity(ScalarFunc("zero"), ScalarFunc("linear", 1.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HolderWarning)
        s_two = solve_mild(f, nl_two, [z1, z2], params, tol=1e-10)
        s_one = solve_mild(f, nl_one, z_sum, params, tol=1e-10)
    assert np.abs(s_two.path.coeffs - s_one.path.coeffs).max() < 1e-8


def test_zero_noise_matches_deterministic_branch(interval):
    # an all-zero path must take the fast deterministic branch bit-for-bit
    params = std_params(interval, t0=0.5)
    z = zero_noise(interval, 128, 0.5)
    f = Field(0.5 / (1 + np.arange(1, 9)) ** 2, interval)
    nl = Nonlinearity(ScalarFunc("saturating", 1.0, 1.0), ScalarFunc("linear", 1.0))
    s_def = solve_mild(f, nl, z, params, tol=1e-11, route="definitional")
    s_young = solve_mild(f, nl, z, params, tol=1e-11, route="young")
    assert np.array_equal(s_def.path.coeffs, s_young.path.coeffs)


def test_young_route_close_to_definitional(interval):
    params = std_params(interval)
    spec = SeriesNoiseSpec(law="power", rho=0.2, beta_star=0.3, n_terms=8, hurst=0.8)
    z = gen_series_noise(spec, interval, 256, 1.0, seed=8)
    f = Field(0.25 / (1 + np.arange(1, 9)) ** 2, interval)
    nl = Nonlinearity.saturating(1.0, 1.0, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HolderWarning)
        s_def = solve_mild(f, nl, z, params, tol=1e-9, route="definitional")
        s_yng = solve_mild(f, nl, z, params, tol=1e-9, route="young")
    rel = np.abs(s_def.path.coeffs - s_yng.path.coeffs).max() / np.abs(s_def.path.coeffs).max()
    assert rel < 0.05  # same object, different quadrature of the rough integral


def test_solution_meta_and_export(tmp_path, interval):
    params = std_params(interval)
    z = zero_noise(interval, 64, 1.0)
    f = Field(0.5 / (1 + np.arange(1, 9)) ** 2, interval)
    sol = solve_mild(f, Nonlinearity.zero(), z, params)
    assert sol.meta["f_norm_order"] == pytest.approx(params.delta + 2 * params.gamma + params.epsilon)
    assert np.isfinite(sol.meta["f_norm_initial"])
    out = tmp_path / "sol.csv"
    export_solution_csv(sol, out)
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data.shape == (65, 9)
    assert np.array_equal(data[:, 1:], sol.path.coeffs)  # 17-digit round trip


def test_grid_convergence_smooth_noise(interval):
    # reference config with a smooth driver: the gap between successive
    # grid solutions shrinks by >= 1.5x per doubling
    params = std_params(interval)
    f = Field(0.25 / (1 + np.arange(1, 9)) ** 2, interval)
    nl = Nonlinearity.saturating(1.0, 1.0, 1.0)

    def solve_at(n):
        times = np.linspace(0, 1, n + 1)
        coeffs = np.zeros((n + 1, 8))
        coeffs[:, 0] = times**2
        coeffs[:, 1] = 0.5 * np.sin(times * 2.0)
        z = NoisePath(times=times, coeffs=coeffs, basis=interval)
        return solve_mild(f, nl, z, params, tol=1e-11, max_iter=60, check_noise_holder=False)

    sols = {n: solve_at(n) for n in (64, 128, 256)}
    lamd = interval.eigenvalues ** params.delta

    def gap(a, b, stride):
        d = a.path.coeffs - b.path.coeffs[::stride]
        return np.max(np.sqrt(np.sum(d**2, axis=1)) + np.sqrt(d**2 @ lamd))

    d1 = gap(sols[64], sols[128], 2)
    d2 = gap(sols[128], sols[256], 2)
    assert d1 / d2 >= 1.5
