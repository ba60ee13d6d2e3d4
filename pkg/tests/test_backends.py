"""The compiled kernels must agree with the NumPy reference bit-for-bit
up to association order (<= a few ulp)."""
import numpy as np
import pytest

from fracmild import _kernels_py
from fracmild.moments import LeftTables, RightTables, outer_weight_moments

try:
    from fracmild import _fastkernels
except ImportError:
    _fastkernels = None

needs_compiled = pytest.mark.skipif(_fastkernels is None, reason="compiled kernels not built")


@pytest.fixture(scope="module")
def problem():
    rng = np.random.default_rng(0)
    n, n_modes, n_nodes = 48, 5, 12
    h = 1.0 / n
    eta = 0.3
    lam = np.sort(rng.uniform(0.0, 40.0, n_modes))
    lam[0] = 0.0
    b_arr = rng.standard_normal((n + 1, n_modes, n_nodes))
    zc = np.cumsum(rng.standard_normal((n + 1, n_modes)), axis=0) / n
    zc[0] = 0.0
    synth = rng.standard_normal((n_modes, n_nodes))
    explag = np.exp(-np.outer(lam, np.arange(n + 1) * h))
    ltab = LeftTables(lam, h, n, eta)
    rtab = RightTables(h, n, 1.0 - eta)
    w0, w1 = outer_weight_moments(h, n, eta)
    return dict(n=n, h=h, eta=eta, lam=lam, B=b_arr, zc=zc, synth=synth,
                explag=explag, ltab=ltab, rtab=rtab, w0=w0, w1=w1)


@needs_compiled
def test_left_profile_agreement(problem):
    p = problem
    a = _kernels_py.left_operator_profile(p["B"], p["h"], p["eta"], p["ltab"])
    b = _fastkernels.left_operator_profile(p["B"], p["h"], p["eta"], p["ltab"])
    assert np.abs(a - b).max() < 1e-12 * max(1.0, np.abs(a).max())


@needs_compiled
def test_right_table_agreement(problem):
    p = problem
    a = _kernels_py.right_derivative_table(p["zc"], p["h"], 1.0 - p["eta"], p["rtab"])
    b = _fastkernels.right_derivative_table(p["zc"], p["h"], 1.0 - p["eta"], p["rtab"])
    assert np.abs(a - b).max() < 1e-12 * max(1.0, np.abs(a).max())


@needs_compiled
def test_right_profile_agreement(problem):
    p = problem
    a = _kernels_py.right_derivative_profile(p["zc"], p["h"], 1.0 - p["eta"], p["rtab"])
    b = _fastkernels.right_derivative_profile(p["zc"], p["h"], 1.0 - p["eta"], p["rtab"])
    assert np.abs(a - b).max() < 1e-12 * max(1.0, np.abs(a).max())
    table = _kernels_py.right_derivative_table(p["zc"], p["h"], 1.0 - p["eta"], p["rtab"])
    assert np.abs(table[-1] - a).max() < 1e-10 * max(1.0, np.abs(a).max())


@needs_compiled
def test_convolve_agreement(problem):
    p = problem
    psi = _kernels_py.left_operator_profile(p["B"], p["h"], p["eta"], p["ltab"])
    wt = _kernels_py.right_derivative_table(p["zc"], p["h"], 1.0 - p["eta"], p["rtab"])
    args = (psi, wt, p["zc"], p["synth"], p["explag"], p["w0"], p["w1"], p["h"], p["eta"])
    a = _kernels_py.convolve_targets(*args)
    b = _fastkernels.convolve_targets(*args)
    assert np.abs(a - b).max() < 1e-11 * max(1.0, np.abs(a).max())
    wp = _kernels_py.right_derivative_profile(p["zc"], p["h"], 1.0 - p["eta"], p["rtab"])
    args1 = (psi, wp, p["zc"], p["synth"], p["explag"], p["w0"], p["w1"], p["h"], p["eta"])
    a1 = _kernels_py.convolve_single(*args1)
    b1 = _fastkernels.convolve_single(*args1)
    assert np.abs(a1 - b1).max() < 1e-11 * max(1.0, np.abs(a1).max())
    assert np.abs(a1 - a[-1]).max() < 1e-10 * max(1.0, np.abs(a1).max())


@needs_compiled
def test_exp_and_rs_paths_agreement(problem):
    p = problem
    rng = np.random.default_rng(1)
    phi = rng.standard_normal((p["n"] + 1, len(p["lam"])))
    a = _kernels_py.exp_conv_path(phi, p["lam"], p["h"])
    b = _fastkernels.exp_conv_path(phi, p["lam"], p["h"])
    assert np.abs(a - b).max() < 1e-13
    q = rng.standard_normal((p["n"], len(p["lam"])))
    a2 = _kernels_py.rs_conv_path(q, p["lam"], p["h"])
    b2 = _fastkernels.rs_conv_path(q, p["lam"], p["h"])
    assert np.abs(a2 - b2).max() < 1e-13


def test_backend_selector():
    from fracmild.backend import backend_name, get_backend

    assert backend_name() in ("python", "compiled")
    assert get_backend("python").BACKEND_NAME == "python"
    with pytest.raises(ValueError):
        get_backend("gpu")
