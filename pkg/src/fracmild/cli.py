"""Batch experiment driver.

``fracmild run <config.json> [--scenario NAME] [--seed N] [--out DIR]
[--threads K]`` builds the pipeline (basis -> noise -> solve -> analyze),
fans out over noise seeds, and writes a run manifest, per-seed solution
CSVs, regularity reports and a summary table.  Exit codes: 0 ok,
2 inadmissible parameters, 3 non-convergence, 4 usage.

Reproducibility contract: identical config and seed give byte-identical
summary tables for any --threads value; wall-clock timings live only in
the manifest.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import jsonschema

from . import __version__
from .backend import backend_name
from .errors import AdmissibilityError, ConfigError, HolderWarning, SummabilityError, TruncationWarning
from .ioutil import write_csv
from .noise import SeriesNoiseSpec, gen_series_noise, path_seed, zero_noise
from .regularity import (
    admissible_region,
    holder_exponent,
    measure_lemma_bounds,
    uniform_bound,
    wgamma_seminorm,
)
from .scenarios import SCENARIOS, list_scenarios, scenario_checks
from .solver import MildSolution, Nonlinearity, ScalarFunc, export_solution_csv, solve_mild
from .spaces import Field, ParamSet
from .spectral import SpectralBasis, build_gasket_basis, build_interval_basis

EXIT_OK = 0
EXIT_INADMISSIBLE = 2
EXIT_NONCONVERGED = 3
EXIT_USAGE = 4

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["space", "params", "noise", "nonlinearity", "solver", "n_paths", "seed"],
    "properties": {
        "space": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["interval", "gasket"]},
                "n_modes": {"type": "integer", "minimum": 1},
                "n_nodes": {"type": "integer", "minimum": 4},
                "level": {"type": "integer", "minimum": 0, "maximum": 6},
            },
        },
        "params": {
            "type": "object",
            "required": ["alpha", "beta", "gamma", "delta", "hurst", "t0"],
            "properties": {
                "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "beta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "gamma": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "hurst": {"type": "number", "exclusiveMinimum": 0.5, "exclusiveMaximum": 1},
                "theta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "t0": {"type": "number", "exclusiveMinimum": 0},
                "epsilon": {"type": "number", "exclusiveMinimum": 0},
                "q": {"type": ["number", "null"], "exclusiveMinimum": 1},
            },
        },
        "noise": {
            "type": "object",
            "required": ["law"],
            "properties": {
                "law": {"enum": ["power", "flat", "zero"]},
                "c_q": {"type": "number", "exclusiveMinimum": 0},
                "rho": {"type": "number", "minimum": 0},
                "beta_star": {"type": "number", "exclusiveMinimum": 0},
                "n_terms": {"type": "integer", "minimum": 1},
                "a1": {"type": "number"},
                "a2": {"type": "number"},
                "b_exponent": {"type": "number"},
            },
        },
        "nonlinearity": {
            "type": "object",
            "required": ["F", "G"],
            "properties": {
                "F": {"$ref": "#/$defs/scalar_func"},
                "G": {"$ref": "#/$defs/scalar_func"},
            },
        },
        "solver": {
            "type": "object",
            "required": ["n_time", "tol", "max_iter"],
            "properties": {
                "n_time": {"type": "integer", "minimum": 32},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "route": {"enum": ["definitional", "young"]},
                "eta": {"type": ["number", "null"]},
            },
        },
        "initial_condition": {"type": "object"},
        "n_paths": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "outputs": {"type": "object"},
    },
    "$defs": {
        "scalar_func": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["zero", "linear", "saturating"]},
                "slope": {"type": "number"},
                "scale": {"type": "number", "exclusiveMinimum": 0},
            },
        }
    },
}


def validate_config(config: dict):
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config field {path}: {exc.message}", field_path=path) from exc
    kind = config["space"]["kind"]
    if kind == "interval" and not {"n_modes", "n_nodes"} <= set(config["space"]):
        raise ConfigError("config field space: interval needs n_modes and n_nodes", "space")
    if kind == "gasket" and "level" not in config["space"]:
        raise ConfigError("config field space: gasket needs level", "space")


def build_basis(space_cfg: dict) -> SpectralBasis:
    if space_cfg["kind"] == "interval":
        return build_interval_basis(space_cfg["n_modes"], space_cfg["n_nodes"])
    return build_gasket_basis(space_cfg["level"])


def build_scalar(cfg: dict) -> ScalarFunc:
    return ScalarFunc(cfg["kind"], cfg.get("slope", 1.0), cfg.get("scale", 1.0))


def build_initial_condition(cfg: dict, basis: SpectralBasis) -> Field:
    kind = cfg.get("kind", "mode_decay")
    coeffs = np.zeros(basis.n_modes)
    if kind == "mode":
        coeffs[cfg.get("index", 1) - 1] = cfg.get("amplitude", 1.0)
    elif kind == "mode_decay":
        i = np.arange(1, basis.n_modes + 1)
        coeffs = cfg.get("amplitude", 0.25) / (1.0 + i) ** cfg.get("power", 2.0)
    elif kind == "coeffs":
        coeffs = np.asarray(cfg["values"], dtype=float)
    else:
        raise ConfigError(f"initial_condition.kind: unknown kind {kind!r}", "initial_condition.kind")
    return Field(coeffs, basis)


def build_noise_spec(cfg: dict, params: ParamSet) -> SeriesNoiseSpec | None:
    if cfg["law"] == "zero":
        return None
    return SeriesNoiseSpec(
        law=cfg["law"],
        c_q=cfg.get("c_q", 1.0),
        rho=cfg.get("rho", 0.4),
        beta_star=cfg.get("beta_star", 0.3),
        a1=cfg.get("a1", 0.0),
        a2=cfg.get("a2", 1.0),
        b_exponent=cfg.get("b_exponent", 1.0),
        n_terms=cfg.get("n_terms", 16),
        hurst=params.hurst,
    )


def _geometric(sol: MildSolution) -> bool:
    ratios = sol.contraction_ratios()
    return bool(sol.converged and (len(ratios) == 0 or np.max(ratios[1:], initial=0.0) <= 0.9))


def _to_builtin(obj):
    if isinstance(obj, dict):
        return {k: _to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_builtin(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _solve_one(index, config, scenario_name, basis, params, nspec, nl, f):
    seed = path_seed(config["seed"], index)
    solver_cfg = config["solver"]
    n_time = solver_cfg["n_time"]
    if nspec is None:
        z = zero_noise(basis, n_time, params.t0)
    else:
        z = gen_series_noise(nspec, basis, n_time, params.t0, seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HolderWarning)
        sol = solve_mild(
            f, nl, z, params,
            tol=solver_cfg["tol"],
            max_iter=solver_cfg["max_iter"],
            eta=solver_cfg.get("eta"),
            route=solver_cfg.get("route", "definitional"),
            theta=params.theta,
        )
        est = holder_exponent(sol.path, params.delta)
        wg = wgamma_seminorm(sol.path, params.gamma, params.delta, use_inf_norm=True)
        ub = uniform_bound(sol.path, params)
        lemmas = measure_lemma_bounds(sol, z, params, n_pairs=8, n_probes=2, seed=index)

        oracle_error = ""
        if scenario_name == "heat-zero-noise":
            tf = np.exp(-np.outer(sol.path.times, basis.eigenvalues**params.theta)) * f.coeffs[None, :]
            oracle_error = float(np.max(np.abs(sol.path.coeffs - tf)))
        elif scenario_name == "linear-mode-oracle":
            mode = config["initial_condition"].get("index", 1) - 1
            lam = basis.eigenvalues[mode]
            slope = config["nonlinearity"]["F"].get("slope", 1.0)
            exact = np.exp((slope - lam) * sol.path.times) * f.coeffs[mode]
            oracle_error = float(np.max(np.abs(sol.path.coeffs[:, mode] - exact)))
        elif scenario_name == "uniqueness-nested-pairs":
            pair = SCENARIOS[scenario_name]["secondary_pair"]
            params2 = ParamSet.for_basis(
                basis, alpha=params.alpha, beta=params.beta, gamma=pair["gamma"],
                delta=pair["delta"], hurst=params.hurst, theta=params.theta, t0=params.t0,
            )
            sol2 = solve_mild(
                f, nl, z, params2,
                tol=solver_cfg["tol"], max_iter=solver_cfg["max_iter"],
                eta=solver_cfg.get("eta"), route=solver_cfg.get("route", "definitional"),
                theta=params.theta,
            )
            lam_d = basis.eigenvalues ** pair["delta"]
            d = sol.path.coeffs - sol2.path.coeffs
            norms = np.sqrt(np.sum(d**2, axis=1)) + np.sqrt(d**2 @ lam_d)
            oracle_error = float(np.max(norms))

    row = {
        "path_index": index,
        "seed": seed,
        "gamma_hat": est.slope,
        "gamma_stderr": est.stderr,
        "gamma_r2": est.r2,
        "wgamma": wg.value,
        "wgamma_divergent": wg.divergence_flag,
        "uniform_bound": ub,
        "lemma_F": lemmas["lemma_F"],
        "lemma_T_diff": lemmas["lemma_T_diff"],
        "lemma_G": lemmas["lemma_G"],
        "iterations": sol.picard_iterations,
        "converged": sol.converged,
        "geometric": _geometric(sol),
        "oracle_error": oracle_error,
    }
    return row, sol, est


SUMMARY_COLUMNS = [
    "path_index", "seed", "gamma_hat", "gamma_stderr", "gamma_r2", "wgamma",
    "wgamma_divergent", "uniform_bound", "lemma_F", "lemma_T_diff", "lemma_G",
    "iterations", "converged", "geometric", "oracle_error",
]


def run_config(config: dict, out_dir, scenario_name: str | None = None, threads: int = 1) -> int:
    """Execute a validated configuration; returns the process exit code."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    warnings.simplefilter("once", TruncationWarning)

    basis = build_basis(config["space"])
    params = ParamSet.for_basis(
        basis,
        alpha=config["params"]["alpha"],
        beta=config["params"]["beta"],
        gamma=config["params"]["gamma"],
        delta=config["params"]["delta"],
        hurst=config["params"]["hurst"],
        theta=config["params"].get("theta", 1.0),
        t0=config["params"]["t0"],
        epsilon=config["params"].get("epsilon", 0.01),
        q=config["params"].get("q"),
    )
    if not params.admissible():
        region = admissible_region(params.alpha, params.beta, basis.spectral_dim)
        region.to_csv(out / "region.csv")
        report = {
            "error": "inadmissible parameters",
            "gamma_max_standard": params.gamma_max_P(),
            "gamma_max_lowdim": params.gamma_max_lowdim(),
            "region_csv": "region.csv",
        }
        (out / "manifest.json").write_text(json.dumps(_to_builtin(report), indent=1))
        print("inadmissible parameters; region report written to region.csv", file=sys.stderr)
        return EXIT_INADMISSIBLE

    nspec = build_noise_spec(config["noise"], params)
    summability = None
    if nspec is not None:
        summability = nspec.summability_check(basis)
        if not summability["ok"]:
            (out / "manifest.json").write_text(json.dumps(_to_builtin({
                "error": "noise coefficient law fails summability",
                "summability": summability,
            }), indent=1))
            print("noise summability check failed", file=sys.stderr)
            return EXIT_INADMISSIBLE

    nl = Nonlinearity(build_scalar(config["nonlinearity"]["F"]), build_scalar(config["nonlinearity"]["G"]))
    f = build_initial_condition(config.get("initial_condition", {}), basis)

    n_paths = config["n_paths"]
    indices = list(range(n_paths))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(
                lambda i: _solve_one(i, config, scenario_name, basis, params, nspec, nl, f), indices
            ))
    else:
        outputs = [_solve_one(i, config, scenario_name, basis, params, nspec, nl, f) for i in indices]

    rows = [row for row, _, _ in outputs]
    artifacts = ["summary.csv"]
    for i, (row, sol, est) in enumerate(outputs):
        sol_name = f"solution_{i:03d}.csv"
        export_solution_csv(sol, out / sol_name)
        reg_name = f"regularity_{i:03d}.json"
        report = {
            "holder_slope": row["gamma_hat"],
            "holder_band": [est.band[0], est.band[1]],
            "holder_r2": row["gamma_r2"],
            "wgamma_seminorm": row["wgamma"],
            "wgamma_divergent": row["wgamma_divergent"],
            "uniform_bound": row["uniform_bound"],
            "lemma_constants": {
                "lemma_F": row["lemma_F"], "lemma_T_diff": row["lemma_T_diff"], "lemma_G": row["lemma_G"],
            },
            "params": {
                "alpha": params.alpha, "beta": params.beta, "gamma": params.gamma, "delta": params.delta,
                "spectral_dim": params.spectral_dim, "hurst": params.hurst, "theta": params.theta,
                "t0": params.t0, "eta": sol.meta["eta"],
            },
            "picard": {
                "iterations": row["iterations"], "converged": row["converged"],
                "contraction_history": sol.contraction_history.tolist(),
            },
        }
        (out / reg_name).write_text(json.dumps(_to_builtin(report), indent=1))
        artifacts += [sol_name, reg_name]

    write_csv(out / "summary.csv", SUMMARY_COLUMNS, [
        [row[c] if isinstance(row[c], str) else (str(row[c]) if isinstance(row[c], (bool, int, np.bool_)) else row[c])
         for c in SUMMARY_COLUMNS]
        for row in rows
    ])

    extra = {"oracle_errors": [row["oracle_error"] for row in rows if row["oracle_error"] != ""]}
    if params.admissible_P():
        extra["gamma_theory"] = params.gamma_max_P()
    else:
        extra["gamma_theory"] = params.gamma_max_lowdim()

    scen = SCENARIOS.get(scenario_name, {}) if scenario_name else {}
    if scen.get("refinement_seeds") and nspec is not None:
        # couple the comparison: the fine grid carries the same noise sample,
        # the base grid sees its restriction
        from fracmild.noise import subsample

        ub_base, ub_fine = [], []
        n_time = config["solver"]["n_time"]
        for i in range(scen["refinement_seeds"]):
            seed = path_seed(config["seed"], i)
            z_fine = gen_series_noise(nspec, basis, 2 * n_time, params.t0, seed)
            z_coarse = subsample(z_fine, 2)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", HolderWarning)
                for z_run, sink in ((z_coarse, ub_base), (z_fine, ub_fine)):
                    sol = solve_mild(
                        f, nl, z_run, params,
                        tol=config["solver"]["tol"], max_iter=config["solver"]["max_iter"],
                        eta=config["solver"].get("eta"),
                        route=config["solver"].get("route", "definitional"), theta=params.theta,
                    )
                    sink.append(uniform_bound(sol.path, params))
        extra["uniform_bound_base"] = float(np.median(ub_base))
        extra["uniform_bound_refined"] = float(np.median(ub_fine))

    checks = scenario_checks(scenario_name, config, rows, extra) if scenario_name else {}

    manifest = {
        "version": __version__,
        "backend": backend_name(),
        "scenario": scenario_name,
        "config": config,
        "path_seeds": [row["seed"] for row in rows],
        "summability": summability,
        "artifacts": sorted(artifacts),
        "checks": checks,
        "wall_time_seconds": time.perf_counter() - t_start,
    }
    (out / "manifest.json").write_text(json.dumps(_to_builtin(manifest), indent=1))

    if not all(row["converged"] for row in rows):
        bad = [row["path_index"] for row in rows if not row["converged"]]
        print(f"non-convergence on paths {bad}; contraction histories in regularity JSONs", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def main(argv=None) -> int:
    parser = _Parser(prog="fracmild", description="pathwise mild-solution laboratory")
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="run a config or a named scenario")
    p_run.add_argument("config", nargs="?", help="path to a JSON run configuration")
    p_run.add_argument("--scenario", help="named scenario (see list-scenarios)")
    p_run.add_argument("--seed", type=int, help="override the master seed")
    p_run.add_argument("--out", default="fracmild_out", help="output directory")
    p_run.add_argument("--threads", type=int, default=1)

    sub.add_parser("list-scenarios", help="list named scenarios")

    p_exp = sub.add_parser("export-basis", help="export a basis as JSON")
    p_exp.add_argument("spec", help="interval:N_MODES:N_NODES or gasket:LEVEL")
    p_exp.add_argument("file", help="output path")

    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    if args.command == "list-scenarios":
        for name, desc in list_scenarios():
            print(f"{name}: {desc}")
        return EXIT_OK

    if args.command == "export-basis":
        parts = args.spec.split(":")
        try:
            if parts[0] == "interval" and len(parts) == 3:
                basis = build_interval_basis(int(parts[1]), int(parts[2]))
            elif parts[0] == "gasket" and len(parts) == 2:
                basis = build_gasket_basis(int(parts[1]))
            else:
                print(f"unknown basis spec {args.spec!r}", file=sys.stderr)
                return EXIT_USAGE
        except ValueError as exc:
            print(f"bad basis spec: {exc}", file=sys.stderr)
            return EXIT_USAGE
        Path(args.file).write_text(basis.to_json())
        return EXIT_OK

    # run
    if args.scenario is not None:
        if args.scenario not in SCENARIOS:
            print(f"unknown scenario {args.scenario!r}; available: "
                  f"{', '.join(name for name, _ in list_scenarios())}", file=sys.stderr)
            return EXIT_USAGE
        config = json.loads(json.dumps(SCENARIOS[args.scenario]["config"]))
    elif args.config:
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"cannot read config: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        print("run needs a config path or --scenario", file=sys.stderr)
        return EXIT_USAGE

    if args.seed is not None:
        config["seed"] = args.seed
    try:
        validate_config(config)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    try:
        return run_config(config, args.out, scenario_name=args.scenario, threads=args.threads)
    except (AdmissibilityError, SummabilityError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INADMISSIBLE


if __name__ == "__main__":
    sys.exit(main())
