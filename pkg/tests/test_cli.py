import json

import numpy as np
import pytest

from openbattery.cli import main
from openbattery.io import read_csv

TINY = {"params": {"g": 0.3, "n_modes": 2, "fock_cutoff": 3}, "horizon": 0.2, "sample_every": 5,
        "policies": ["agnostic", "ansatz"], "optimizer": {"n_theta": 5, "n_phi": 4}}


@pytest.fixture
def config_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(TINY))
    return p


def test_ground(tmp_path, config_file, capsys):
    assert main(["ground", "--config", str(config_file), "--engine", "both", "--out-dir", str(tmp_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["relative_difference"] < 1e-6
    assert (tmp_path / "ground_exact.bin").exists() and (tmp_path / "ground_mps.bin").exists()


def test_protocol(tmp_path, config_file, capsys):
    code = main(["protocol", "--config", str(config_file), "--out-dir", str(tmp_path), "--svg", "off", "--seed", "7"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "ok"
    assert not (tmp_path / "ergotropy.svg").exists()
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seeds"] == {"run": 7, "optimizer": 7}


def test_sweep(tmp_path, config_file, capsys):
    assert main(["sweep", "--config", str(config_file), "--g-grid", "0,0.2", "--out-dir", str(tmp_path)]) == 0
    _, cols, rows = read_csv(tmp_path / "sweep.csv")
    assert len(rows) == 2 and cols[0] == "g"
    assert (tmp_path / "sweep.svg").exists()


def test_export_circuit(tmp_path, capsys):
    assert main(["export-circuit", "--out-dir", str(tmp_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["cx_count"] <= 3 and out["reconstruction_error"] < 1e-10
    np.save(tmp_path / "swap.npy", np.eye(4)[[0, 2, 1, 3]])
    assert main(["export-circuit", "--gate", str(tmp_path / "swap.npy"), "--out-dir", str(tmp_path)]) == 0
    assert json.loads(capsys.readouterr().out)["cx_count"] == 3


def test_bad_json_reports_position(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "horizon": ,\n}')
    assert main(["ground", "--config", str(p), "--out-dir", str(tmp_path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["line"] == 2 and err["column"] == 14


@pytest.mark.parametrize("argv", [
    ["sweep", "--g-grid", ""],
    ["sweep", "--g-grid", "0,x"],
    ["ground", "--seed", "-3"],
    ["export-circuit", "--gate", "missing.npy"],
])
def test_usage_errors(tmp_path, argv, capsys):
    assert main(argv + ["--out-dir", str(tmp_path)]) == 2


def test_unknown_config_key(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"params": {"gg": 1}}))
    assert main(["ground", "--config", str(p), "--out-dir", str(tmp_path)]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "config"


def test_capacity_exit_code(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"params": {"n_modes": 30, "fock_cutoff": 7}}))
    assert main(["ground", "--config", str(p), "--engine", "exact", "--out-dir", str(tmp_path)]) == 4
