import json
from pathlib import Path

import numpy as np
import pytest

from fracmild.cli import main, validate_config
from fracmild.errors import ConfigError
from fracmild.spectral import SpectralBasis, build_interval_basis

SMALL_CONFIG = {
    "space": {"kind": "interval", "n_modes": 8, "n_nodes": 64},
    "params": {"alpha": 0.21, "beta": 0.35, "gamma": 0.3, "delta": 0.45, "hurst": 0.8, "theta": 1.0, "t0": 1.0},
    "noise": {"law": "power", "c_q": 1.0, "rho": 0.2, "beta_star": 0.3, "n_terms": 8},
    "nonlinearity": {
        "F": {"kind": "saturating", "slope": 1.0, "scale": 1.0},
        "G": {"kind": "saturating", "slope": 1.0, "scale": 1.0},
    },
    "solver": {"n_time": 64, "tol": 1e-6, "max_iter": 20, "route": "definitional"},
    "initial_condition": {"kind": "mode_decay", "amplitude": 0.25, "power": 2.0},
    "n_paths": 2,
    "seed": 99,
    "outputs": {"formats": ["csv", "json"]},
}


def test_list_scenarios_deterministic(capsys):
    assert main(["list-scenarios"]) == 0
    out1 = capsys.readouterr().out
    assert main(["list-scenarios"]) == 0
    out2 = capsys.readouterr().out
    assert out1 == out2
    for name in ("heat-zero-noise", "linear-mode-oracle", "thm34-interval-H08"):
        assert name in out1


def test_unknown_scenario_exit_code(tmp_path):
    assert main(["run", "--scenario", "does-not-exist", "--out", str(tmp_path)]) == 4


def test_no_command_exit_code():
    assert main([]) == 4


def test_missing_config_exit_code(tmp_path):
    assert main(["run", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 4
    assert main(["run", "--out", str(tmp_path)]) == 4


def test_schema_validation_paths():
    bad = json.loads(json.dumps(SMALL_CONFIG))
    bad["params"]["alpha"] = 1.5
    with pytest.raises(ConfigError) as exc:
        validate_config(bad)
    assert "params.alpha" in str(exc.value)
    bad2 = json.loads(json.dumps(SMALL_CONFIG))
    del bad2["space"]["n_nodes"]
    with pytest.raises(ConfigError):
        validate_config(bad2)


def test_export_basis_roundtrip(tmp_path):
    out = tmp_path / "basis.json"
    assert main(["export-basis", "interval:8:64", str(out)]) == 0
    b = SpectralBasis.from_json(out.read_text())
    ref = build_interval_basis(8, 64)
    assert np.array_equal(b.eigenvalues, ref.eigenvalues)
    assert main(["export-basis", "gasket:1", str(tmp_path / "g.json")]) == 0
    assert main(["export-basis", "triangle:3", str(tmp_path / "t.json")]) == 4


def test_run_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL_CONFIG))
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    summary = (out / "summary.csv").read_text().splitlines()
    assert len(summary) == 1 + SMALL_CONFIG["n_paths"]
    # every artifact is referenced and nothing else exists
    files = {p.name for p in out.iterdir()}
    assert files == set(manifest["artifacts"]) | {"manifest.json"}


def test_run_reproducible_across_threads(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL_CONFIG))
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--out", str(out1), "--threads", "1"]) == 0
    assert main(["run", str(cfg), "--out", str(out2), "--threads", "2"]) == 0
    assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()


def test_run_seed_override_changes_results(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL_CONFIG))
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--out", str(out1)]) == 0
    assert main(["run", str(cfg), "--out", str(out2), "--seed", "123"]) == 0
    assert (out1 / "summary.csv").read_bytes() != (out2 / "summary.csv").read_bytes()


def test_run_inadmissible_params(tmp_path):
    bad = json.loads(json.dumps(SMALL_CONFIG))
    bad["params"]["alpha"] = 0.45  # gamma_max goes negative
    bad["params"]["gamma"] = 0.5
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(bad))
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 2
    assert (out / "region.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert "gamma_max_standard" in manifest


def test_run_summability_rejection(tmp_path):
    bad = json.loads(json.dumps(SMALL_CONFIG))
    bad["noise"] = {"law": "flat", "c_q": 1.0, "beta_star": 0.05, "n_terms": 8}
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(bad))
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 2


def test_run_nonconvergence_exit(tmp_path):
    bad = json.loads(json.dumps(SMALL_CONFIG))
    bad["solver"]["tol"] = 1e-16
    bad["solver"]["max_iter"] = 2
    bad["n_paths"] = 1
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(bad))
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 3
    manifest = json.loads((out / "manifest.json").read_text())
    reg = json.loads((out / "regularity_000.json").read_text())
    assert reg["picard"]["converged"] is False
    assert len(reg["picard"]["contraction_history"]) >= 1


def test_heat_zero_noise_scenario(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--scenario", "heat-zero-noise", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["checks"]["pass"] is True
    assert manifest["checks"]["semigroup_identity_error"] < 1e-12


def test_linear_mode_oracle_scenario(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--scenario", "linear-mode-oracle", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["checks"]["pass"] is True
    assert manifest["checks"]["closed_form_error"] < 1e-6


def test_solution_csv_parses(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(SMALL_CONFIG))
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == 0
    data = np.loadtxt(out / "solution_000.csv", delimiter=",", skiprows=1)
    assert data.shape == (65, 9)
    times = data[:, 0]
    assert times[0] == 0.0 and times[-1] == 1.0
