"""Named experiment scenarios for the batch runner.

Each scenario is a complete run configuration plus a check function that
grades the finished run (recorded in the manifest, never raised).  The
regularity scenarios exercise the full pipeline at desk scale: solve the
mild equation over an ensemble of noise seeds and compare the measured
time-Hölder exponent in H^delta against the admissible-region prediction.
"""
from __future__ import annotations

import numpy as np

_INTERVAL_SMOOTH_IC = {"kind": "mode_decay", "amplitude": 0.25, "power": 2.0}


def _base(space, params, noise, nonlinearity, solver, n_paths, seed, ic=None):
    return {
        "space": space,
        "params": params,
        "noise": noise,
        "nonlinearity": nonlinearity,
        "solver": solver,
        "initial_condition": ic or _INTERVAL_SMOOTH_IC,
        "n_paths": n_paths,
        "seed": seed,
        "outputs": {"formats": ["csv", "json"]},
    }


SCENARIOS: dict[str, dict] = {
    "heat-zero-noise": {
        "description": "F=G=0 heat flow; solution must equal T(t)f to round-off",
        "config": _base(
            {"kind": "interval", "n_modes": 8, "n_nodes": 64},
            {"alpha": 0.21, "beta": 0.35, "gamma": 0.3, "delta": 0.45, "hurst": 0.8, "theta": 1.0, "t0": 1.0},
            {"law": "zero"},
            {"F": {"kind": "zero"}, "G": {"kind": "zero"}},
            {"n_time": 128, "tol": 1e-10, "max_iter": 5, "route": "definitional"},
            1,
            12345,
        ),
    },
    "linear-mode-oracle": {
        "description": "F linear, G=0: per-mode closed form exp((slope-lambda_i) t)",
        "config": _base(
            {"kind": "interval", "n_modes": 8, "n_nodes": 64},
            {"alpha": 0.21, "beta": 0.35, "gamma": 0.3, "delta": 0.45, "hurst": 0.8, "theta": 1.0, "t0": 0.25},
            {"law": "zero"},
            {"F": {"kind": "linear", "slope": 1.0}, "G": {"kind": "zero"}},
            {"n_time": 512, "tol": 1e-12, "max_iter": 60, "route": "definitional"},
            1,
            12345,
            ic={"kind": "mode", "index": 1, "amplitude": 1.0},
        ),
    },
    "thm34-interval-H08": {
        "description": "Main regularity run: interval, H=0.8, median Hölder slope vs admissible bound",
        "config": _base(
            {"kind": "interval", "n_modes": 16, "n_nodes": 129},
            {"alpha": 0.21, "beta": 0.35, "gamma": 0.3, "delta": 0.45, "hurst": 0.8, "theta": 1.0, "t0": 1.0},
            {"law": "power", "c_q": 1.0, "rho": 0.2, "beta_star": 0.3, "n_terms": 16},
            {"F": {"kind": "saturating", "slope": 1.0, "scale": 1.0},
             "G": {"kind": "saturating", "slope": 1.0, "scale": 1.0}},
            {"n_time": 512, "tol": 1e-7, "max_iter": 25, "route": "definitional"},
            50,
            20240,
        ),
        "gamma_margin": 0.05,
        "refinement_seeds": 2,
    },
    "lowdim-white-space": {
        "description": "Low spectral dimension regime: flat spectrum (white in space), H=0.85",
        "config": _base(
            {"kind": "interval", "n_modes": 16, "n_nodes": 129},
            {"alpha": 0.2, "beta": 0.5, "gamma": 0.25, "delta": 0.5, "hurst": 0.85, "theta": 1.0, "t0": 1.0, "q": 2.5},
            {"law": "flat", "c_q": 0.5, "beta_star": 0.5, "n_terms": 16},
            {"F": {"kind": "saturating", "slope": 1.0, "scale": 1.0},
             "G": {"kind": "saturating", "slope": 1.0, "scale": 1.0}},
            {"n_time": 512, "tol": 1e-7, "max_iter": 25, "route": "definitional"},
            30,
            31337,
        ),
        "gamma_margin": 0.05,
    },
    "uniqueness-nested-pairs": {
        "description": "Same noise solved at nested (gamma, delta) pairs agrees within 10 tol",
        "config": _base(
            {"kind": "interval", "n_modes": 16, "n_nodes": 129},
            {"alpha": 0.21, "beta": 0.35, "gamma": 0.3, "delta": 0.45, "hurst": 0.8, "theta": 1.0, "t0": 1.0},
            {"law": "power", "c_q": 1.0, "rho": 0.2, "beta_star": 0.3, "n_terms": 16},
            {"F": {"kind": "saturating", "slope": 1.0, "scale": 1.0},
             "G": {"kind": "saturating", "slope": 1.0, "scale": 1.0}},
            {"n_time": 256, "tol": 1e-7, "max_iter": 25, "route": "definitional", "eta": 0.24},
            3,
            777,
        ),
        "secondary_pair": {"gamma": 0.25, "delta": 0.4},
    },
    "gasket-e2e": {
        "description": "Level-2 gasket pipeline: admissible params for d_S = 2 ln3/ln5",
        "config": _base(
            {"kind": "gasket", "level": 2},
            {"alpha": 0.15, "beta": 0.35, "gamma": 0.3, "delta": 0.5, "hurst": 0.85, "theta": 1.0, "t0": 0.04},
            {"law": "power", "c_q": 1.0, "rho": 0.9, "beta_star": 0.3, "n_terms": 15},
            {"F": {"kind": "saturating", "slope": 1.0, "scale": 1.0},
             "G": {"kind": "saturating", "slope": 1.0, "scale": 1.0}},
            {"n_time": 512, "tol": 1e-7, "max_iter": 25, "route": "definitional"},
            12,
            4242,
            ic={"kind": "mode_decay", "amplitude": 0.3, "power": 2.0},
        ),
        "gamma_margin": 0.05,
    },
}


def list_scenarios() -> list[tuple[str, str]]:
    """Deterministically ordered (name, description) pairs."""
    return [(name, SCENARIOS[name]["description"]) for name in SCENARIOS]


def scenario_checks(name: str, config: dict, results: list, extra: dict) -> dict:
    """Grade a finished scenario run; returns check name -> bool/value."""
    checks: dict = {}
    if name == "heat-zero-noise":
        checks["semigroup_identity_error"] = extra["oracle_errors"][0]
        checks["pass"] = extra["oracle_errors"][0] < 1e-12
    elif name == "linear-mode-oracle":
        checks["closed_form_error"] = extra["oracle_errors"][0]
        checks["pass"] = extra["oracle_errors"][0] < 1e-6
    elif name == "uniqueness-nested-pairs":
        tol = config["solver"]["tol"]
        worst = max(extra["oracle_errors"])
        checks["max_pair_difference"] = worst
        checks["tolerance"] = 10.0 * tol
        checks["pass"] = worst <= 10.0 * tol
    elif name in ("thm34-interval-H08", "lowdim-white-space", "gasket-e2e"):
        margin = SCENARIOS[name].get("gamma_margin", 0.05)
        gamma_theory = extra["gamma_theory"]
        slopes = np.array([r["gamma_hat"] for r in results])
        med = float(np.median(slopes))
        geo = np.array([r["geometric"] for r in results], dtype=bool)
        checks["gamma_theory"] = gamma_theory
        checks["median_gamma_hat"] = med
        checks["median_above_bound"] = bool(med >= gamma_theory - margin)
        checks["geometric_fraction"] = float(np.mean(geo))
        checks["geometric_ok"] = bool(np.mean(geo) >= 0.95)
        checks["pass"] = checks["median_above_bound"] and checks["geometric_ok"]
        if "uniform_bound_refined" in extra:
            ub0, ub1 = extra["uniform_bound_base"], extra["uniform_bound_refined"]
            rel = abs(ub0 - ub1) / max(ub0, 1e-300)
            checks["uniform_bound_refinement_rel"] = rel
            checks["uniform_bound_stable"] = bool(rel <= 0.2)
            checks["pass"] = checks["pass"] and checks["uniform_bound_stable"]
    else:
        checks["pass"] = True
    return checks
