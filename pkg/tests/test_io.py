import json
import subprocess
import sys

import numpy as np
import pytest

from sgns.cli import main, run_command
from sgns.config import ConfigError, load_config
from sgns.io import read_snapshot, write_snapshot
from sgns.spectral import random_field

TINY = {
    "domain": {"d": 2, "K": 3},
    "galerkin": {"n": 8, "dt": 1e-3, "T": 0.02, "snapshot_stride": 10,
                 "u0": {"kind": "random", "modes": 6, "seed": 3}},
    "ensemble": {"trajectories": 8, "base_seed": 5},
}


def write_cfg(tmp_path, extra=None, name="cfg.json"):
    cfg = json.loads(json.dumps(TINY))
    for key, val in (extra or {}).items():
        if isinstance(val, dict):
            cfg.setdefault(key, {}).update(val)
        else:
            cfg[key] = val
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def test_defaults_fill_in(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("{}")
    run = load_config(path)
    assert run.basis.domain.d == 2
    assert run.basis.domain.K == 8
    assert abs(run.basis.scale.s - 2.5) < 1e-15
    assert abs(run.basis.scale.s_U - 4.5) < 1e-15
    assert run.model is not None and run.model.M == 1
    assert run.n == 16


def test_unknown_key_rejected(tmp_path):
    path = write_cfg(tmp_path, {"galerkin": {"dt_max": 1.0}})
    with pytest.raises(ConfigError, match=r"galerkin\.dt_max"):
        load_config(path)


def test_cfl_gate_rejected(tmp_path):
    path = write_cfg(tmp_path, {"galerkin": {"dt": 0.1, "T": 1.0, "n": 48}})
    with pytest.raises(ConfigError, match="stability gate"):
        load_config(path)


def test_all_violations_reported(tmp_path):
    path = write_cfg(tmp_path, {"galerkin": {"dt_max": 1.0, "dt": 0.5},
                                "ensemble": {"trajectories": 0}})
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert len(exc.value.violations) >= 3


def test_config_hash_key_order_invariant(tmp_path):
    p1 = tmp_path / "a.json"
    p1.write_text('{"domain": {"d": 2, "K": 3}, "galerkin": {"n": 8, "T": 0.02}}')
    p2 = tmp_path / "b.json"
    p2.write_text('{"galerkin": {"T": 0.02, "n": 8}, "domain": {"K": 3, "d": 2}}')
    assert load_config(p1).config_hash == load_config(p2).config_hash


def test_snapshot_roundtrip(basis2d_small, rng, tmp_path):
    u = random_field(basis2d_small, rng)
    path = tmp_path / "field.bin"
    write_snapshot(path, u, n=10)
    v, n = read_snapshot(path, basis2d_small)
    assert n == 10
    assert np.array_equal(u.coeffs, v.coeffs)


def test_snapshot_rejects_mismatched_basis(basis2d_small, basis3d_small, rng, tmp_path):
    u = random_field(basis2d_small, rng)
    path = tmp_path / "field.bin"
    write_snapshot(path, u)
    with pytest.raises(ValueError):
        read_snapshot(path, basis3d_small)


def test_verify_operators_verb(tmp_path):
    path = write_cfg(tmp_path, {"experiment": {"samples": 25}})
    run = load_config(path)
    code = run_command("verify-operators", run, tmp_path / "out")
    assert code == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["passed"] is True
    assert summary["config_hash"] == run.config_hash
    assert (tmp_path / "out" / "operator_identities.csv").exists()


def test_certify_noise_verb(tmp_path):
    path = write_cfg(tmp_path, {"noise": {"eps": 0.5}, "experiment": {"samples": 300}})
    run = load_config(path)
    code = run_command("certify-noise", run, tmp_path / "out")
    assert code == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert abs(summary["eta"] - 0.5) < 1e-12
    assert abs(summary["lam0"] - 1.5) < 1e-12


def test_certify_noise_rejects_degenerate(tmp_path):
    bad = {
        "noise": {"directions": [
            {"b": {"const": [1.4142135623730951, 0.0]}, "c": None},
            {"b": {"const": [0.0, 1.4142135623730951]}, "c": None},
        ]},
        "experiment": {"samples": 50},
    }
    path = write_cfg(tmp_path, bad)
    run = load_config(path)
    code = run_command("certify-noise", run, tmp_path / "out")
    assert code == 1
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert "coercivity" in summary["failure"]


def test_simulate_verb_writes_snapshots(tmp_path):
    path = write_cfg(tmp_path)
    run = load_config(path)
    code = run_command("simulate", run, tmp_path / "out")
    assert code == 0
    snaps = sorted((tmp_path / "out" / "snapshots").glob("*.bin"))
    assert len(snaps) == 3  # steps 0, 10, 20
    field, n = read_snapshot(snaps[0], run.basis)
    assert n == 8


def test_ensemble_verb_and_worker_determinism(tmp_path):
    path = write_cfg(tmp_path)
    run = load_config(path)
    assert run_command("ensemble", run, tmp_path / "o1", workers=1) == 0
    assert run_command("ensemble", run, tmp_path / "o2", workers=2) == 0
    b1 = (tmp_path / "o1" / "summary.json").read_bytes()
    b2 = (tmp_path / "o2" / "summary.json").read_bytes()
    assert b1 == b2
    c1 = (tmp_path / "o1" / "functionals.csv").read_bytes()
    c2 = (tmp_path / "o2" / "functionals.csv").read_bytes()
    assert c1 == c2


def test_spaces_verb(tmp_path):
    path = write_cfg(tmp_path, {"experiment": {"levels": 12, "samples": 500}})
    run = load_config(path)
    code = run_command("spaces", run, tmp_path / "out")
    assert code == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["embedding_violations"] == 0
    assert summary["max_embedding_norm"] <= 0.5


def test_uniqueness_verb(tmp_path):
    path = write_cfg(tmp_path, {
        "ensemble": {"trajectories": 10},
        "experiment": {"certify_samples": 200, "gamma": 1e-8, "twin_trajectories": 2},
    })
    run = load_config(path)
    code = run_command("uniqueness", run, tmp_path / "out")
    assert code == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["twins_identical"] is True
    assert summary["median_ratio_T"] <= 1.1


def test_cli_main_smoke(tmp_path):
    path = write_cfg(tmp_path, {"experiment": {"samples": 10}})
    code = main(["verify-operators", "--config", str(path), "--out", str(tmp_path / "out")])
    assert code == 0


def test_cli_bad_config_exit_code(tmp_path):
    path = write_cfg(tmp_path, {"galerkin": {"dt_max": 1.0}})
    code = main(["simulate", "--config", str(path), "--out", str(tmp_path / "out")])
    assert code == 2


def test_console_entry_point(tmp_path):
    path = write_cfg(tmp_path, {"experiment": {"samples": 5}})
    proc = subprocess.run(
        [sys.executable, "-m", "sgns.cli", "verify-operators",
         "--config", str(path), "--out", str(tmp_path / "out")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "PASS" in proc.stdout
