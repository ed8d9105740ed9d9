import json

import numpy as np
import pytest

from openbattery.errors import ConfigError
from openbattery.io import read_csv, write_csv, write_json
from openbattery.model import ModelParams, closed_eigensystem
from openbattery.optimize import OptimizerConfig
from openbattery.protocol import (
    SWEEP_COLUMNS,
    WORK_COLUMNS,
    ProtocolConfig,
    charge,
    charging_unitary,
    run_protocol,
    singlet_population,
    sweep_g,
)


def tiny_config(**kw):
    base = dict(params=ModelParams(g=0.4, n_modes=2, fock_cutoff=3), horizon=0.4, dt=0.02, sample_every=5,
                refine_every=2, optimizer=OptimizerConfig(n_theta=9, n_phi=8, haar_samples=10, restarts=1,
                                                          max_evals=200))
    base.update(kw)
    return ProtocolConfig(**base)


def test_charging_unitary_columns():
    eig = closed_eigensystem(ModelParams())
    u = charging_unitary(eig)
    assert np.abs(u @ u.conj().T - np.eye(4)).max() < 1e-14
    # |ud> goes to the singlet, |uu> and |dd> to the outer levels
    assert abs(np.vdot(eig.eigenvectors[:, 2], u[:, 0])) == pytest.approx(1.0, abs=1e-14)
    assert abs(np.vdot(eig.eigenvectors[:, 0], u[:, 1])) == pytest.approx(1.0, abs=1e-14)
    assert abs(np.vdot(eig.eigenvectors[:, 3], u[:, 3])) == pytest.approx(1.0, abs=1e-14)


def test_config_validation():
    with pytest.raises(ConfigError):
        ProtocolConfig(engine="dense")
    with pytest.raises(ConfigError):
        ProtocolConfig(policies=("greedy",))
    with pytest.raises(ConfigError):
        ProtocolConfig(seed=-1)
    with pytest.raises(ConfigError):
        ProtocolConfig(discretization="gauss")
    with pytest.raises(ConfigError):
        ProtocolConfig.from_dict({"params": {"g": 0.1, "zeta": 1}})
    with pytest.raises(ConfigError):
        ProtocolConfig.from_dict({"horizon": 1.0, "extra": 1})


def test_config_roundtrip():
    cfg = tiny_config(engine="both")
    back = ProtocolConfig.from_json(json.dumps(cfg.to_dict()))
    assert back == cfg
    assert back.engines == ("exact", "mps")


def test_csv_roundtrip(tmp_path):
    write_csv(tmp_path / "a.csv", "demo", ["x", "ok", "tag"], [[0.1, True, "a"], [float("nan"), False, "b"]])
    schema, cols, rows = read_csv(tmp_path / "a.csv")
    assert schema == "# schema: demo/1 x,ok,tag"
    assert cols == ["x", "ok", "tag"]
    assert rows[0] == [0.1, 1.0, "a"] and np.isnan(rows[1][0])
    write_json(tmp_path / "b.json", {"b": 1, "a": [1.5]})
    assert (tmp_path / "b.json").read_text().startswith('{\n  "a"')


def test_run_protocol_outputs(tmp_path):
    cfg = tiny_config()
    res = run_protocol(cfg, tmp_path, svg=True)
    assert res.manifest["status"] == "ok"
    for name in res.manifest["outputs"]:
        assert (tmp_path / name).exists()
    schema, cols, rows = read_csv(tmp_path / "work.csv")
    assert cols == WORK_COLUMNS and schema.startswith("# schema: openbattery.work/1")
    reps = res.runs["exact"].reports
    assert [round(r.t, 10) for r in reps] == [0.0, 0.1, 0.2, 0.3, 0.4]
    # refinement only on every second sample
    assert [np.isnan(r.e_refined) for r in reps] == [False, True, False, True, False]
    for r in reps:
        assert r.e_ansatz >= r.e_agnostic - 1e-10
        assert r.e_agnostic <= r.e_total + 1e-8
    assert reps[0].e_agnostic == pytest.approx(reps[0].e_total, abs=1e-8)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seeds"] == {"run": cfg.seed, "optimizer": cfg.optimizer.seed}
    assert manifest["completed_engines"] == ["exact"]


def test_run_protocol_both_engines_agree():
    res = run_protocol(tiny_config(engine="both", policies=("agnostic",)))
    a, b = res.runs["exact"].reports, res.runs["mps"].reports
    assert res.runs["exact"].ground_energy == pytest.approx(res.runs["mps"].ground_energy, rel=1e-6)
    for x, y in zip(a, b):
        assert x.e_agnostic == pytest.approx(y.e_agnostic, abs=1e-4)


def test_sweep(tmp_path):
    rows = sweep_g(tiny_config(), [0.0, 0.4], tmp_path, svg=False)
    assert [r["g"] for r in rows] == [0.0, 0.4]
    assert set(rows[0]) == set(SWEEP_COLUMNS)
    # g = 0 reduces to the closed two-qubit values
    assert rows[0]["e_local"] == pytest.approx(5.103178267173826, abs=1e-8)
    assert rows[0]["ground_energy"] == pytest.approx(-2.692582403567252, abs=1e-10)
    assert rows[0]["delta_so"] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ConfigError):
        sweep_g(tiny_config(), [])
    with pytest.raises(ConfigError):
        sweep_g(tiny_config(), [-0.1])


def test_singlet_population():
    eig = closed_eigensystem(ModelParams())
    s = eig.eigenvectors[:, 2]
    assert singlet_population(np.outer(s, s.conj()), eig) == pytest.approx(1.0)
    assert singlet_population(np.eye(4) / 4, eig) == pytest.approx(0.25)


def test_charge_accepts_vector(small_setup):
    out = charge(small_setup["ground"], small_setup["u"])
    assert np.linalg.norm(out.amplitudes) == pytest.approx(1.0)
