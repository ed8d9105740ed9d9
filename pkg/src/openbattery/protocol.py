"""Charge, store, extract.

The pipeline is: biased ground-state solve, charging gate on the qubits,
free evolution under the full Hamiltonian, and at each sampled time the
extraction policies (agnostic inverse charging gate, ansatz grid, Haar
baseline, Pauli refinement) together with the switch-off quantities and
work statistics. Either engine (or both) can drive it.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .ergotropy import (
    ErgotropyReport,
    LocalObjective,
    check_unitary,
    extracted_work,
    subsystem_ergotropy,
    switchoff_price,
)
from .errors import ConfigError
from .exact import (
    KrylovConfig,
    PureStateVector,
    assemble_hamiltonian,
    evolve_krylov,
    ground_state_lanczos,
)
from .exact import effective_local_objective as exact_objective
from .exact import observables as exact_observables
from .io import line_chart_svg, write_csv, write_json
from .model import SZ_TOTAL, ClosedEigensystem, ModelParams, closed_eigensystem, discretize_bath, effective_bias
from .mps import (
    MatrixProductState,
    TruncationPolicy,
    apply_local_gate,
    build_mpo,
    dmrg_ground_state,
    mpo_expectation,
    tdvp_evolve,
)
from .mps import effective_local_objective as mps_objective
from .optimize import OptimizerConfig, ansatz_unitary, grid_search, haar_sample, haar_statistics, refine_local
from .stats import WorkStatistics, work_moments

log = logging.getLogger(__name__)

ENGINES = ("exact", "mps")
POLICIES = ("agnostic", "ansatz", "haar", "refined")
DISCRETIZATIONS = ("midpoint", "equal_weight")
DEFAULT_SEED = 1234


def charging_unitary(eig: ClosedEigensystem) -> np.ndarray:
    """Maps (uu, ud, du, dd) to (singlet, |0>, |1>, |3>)."""
    a, b = eig.coeff_a, eig.coeff_b
    u = np.array([[0, -b, 1, a], [1, a, 0, b], [-1, a, 0, b], [0, -b, -1, a]], dtype=complex) / np.sqrt(2)
    return check_unitary(u)


def charge(ground, u_charge):
    """``(u x 1)|ground>`` for either state representation."""
    if isinstance(ground, MatrixProductState):
        return apply_local_gate(ground, u_charge)
    return ground.apply_local(check_unitary(u_charge))


# -- configuration -------------------------------------------------------------


def _from_dict(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class ProtocolConfig:
    params: ModelParams = field(default_factory=ModelParams)
    engine: str = "exact"
    horizon: float = 20.0
    dt: float = 0.02
    sample_every: int = 5          # evolution steps between extraction samples
    refine_every: int = 5          # extraction samples between refinements
    policies: tuple = POLICIES
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    krylov: KrylovConfig = field(default_factory=KrylovConfig)
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)
    dmrg_sweeps: int = 10
    discretization: str = "equal_weight"
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.engine not in ENGINES + ("both",):
            raise ConfigError(f"engine must be exact, mps or both, got {self.engine!r}")
        if not self.horizon > 0 or not self.dt > 0:
            raise ConfigError("horizon and dt must be > 0")
        if self.sample_every < 1 or self.refine_every < 1 or self.dmrg_sweeps < 1:
            raise ConfigError("sample_every, refine_every and dmrg_sweeps must be >= 1")
        pols = tuple(self.policies)
        if not pols or any(p not in POLICIES for p in pols):
            raise ConfigError(f"policies must be a non-empty subset of {POLICIES}, got {pols}")
        object.__setattr__(self, "policies", pols)
        if self.discretization not in DISCRETIZATIONS:
            raise ConfigError(f"discretization must be one of {DISCRETIZATIONS}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def engines(self):
        return ENGINES if self.engine == "both" else (self.engine,)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = dataclasses.asdict(v) if dataclasses.is_dataclass(v) else v
        out["policies"] = list(self.policies)
        return out

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config: expected an object")
        nested = {"params": ModelParams, "optimizer": OptimizerConfig, "krylov": KrylovConfig,
                  "truncation": TruncationPolicy}
        data = dict(data)
        for key, sub in nested.items():
            if key in data:
                data[key] = _from_dict(sub, data[key], key)
        return _from_dict(cls, data, "config")

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


# -- engines -----------------------------------------------------------------


class _ExactRun:
    tag = "exact"

    def __init__(self, cfg: ProtocolConfig, bath):
        self.cfg = cfg
        self.H = assemble_hamiltonian(cfg.params, bath)

    def ground(self):
        return ground_state_lanczos(self.H, self.cfg.krylov, seed=self.cfg.seed % 2**32)

    def energy(self, state):
        return self.H.expectation(state)

    def trajectory(self, state):
        kc = dataclasses.replace(self.cfg.krylov, dt=self.cfg.dt)
        return evolve_krylov(state, self.H, kc, horizon=self.cfg.horizon, sample_every=self.cfg.sample_every)

    def objective(self, state) -> LocalObjective:
        return exact_objective(state, self.H)

    def observables(self, state):
        return exact_observables(state, self.H)


class _MPSRun:
    tag = "mps"

    def __init__(self, cfg: ProtocolConfig, bath):
        self.cfg = cfg
        self.bath = bath
        self.mpo = build_mpo(cfg.params, bath)
        self.warnings: list[str] = []

    def ground(self):
        res = dmrg_ground_state(self.mpo, self.cfg.truncation, self.cfg.dmrg_sweeps,
                                bias_epsilon=effective_bias(self.cfg.params), seed=self.cfg.seed % 2**32)
        return res.energy, res.state

    def energy(self, state):
        return mpo_expectation(state, self.mpo) / state.norm() ** 2

    def trajectory(self, state):
        return tdvp_evolve(state, self.mpo, dt=self.cfg.dt, horizon=self.cfg.horizon, policy=self.cfg.truncation,
                           sample_every=self.cfg.sample_every, warnings=self.warnings)

    def objective(self, state) -> LocalObjective:
        return mps_objective(state, self.cfg.params, self.bath)

    def observables(self, state):
        obj = self.objective(state)
        rho = obj.rho
        return {
            "energy": self.energy(state),
            "norm": float(state.norm()),
            "sz_total": float(np.real(np.trace(rho @ SZ_TOTAL))),
            "purity": float(np.real(np.trace(rho @ rho))),
        }


def _make_engine(tag, cfg, bath):
    return _ExactRun(cfg, bath) if tag == "exact" else _MPSRun(cfg, bath)


# -- orchestration -------------------------------------------------------------


@dataclass
class EngineRun:
    engine: str
    ground_energy: float
    charged_energy: float
    reports: list = field(default_factory=list)         # ErgotropyReport per sample
    work: list = field(default_factory=list)            # (t, policy, WorkStatistics)
    trajectory: list = field(default_factory=list)      # (t, observables dict)
    refine_trace: list = field(default_factory=list)    # (t, restart, value, x)
    warnings: list = field(default_factory=list)


@dataclass
class ProtocolResult:
    config: ProtocolConfig
    runs: dict
    manifest: dict
    timings: dict


def evaluate_sample(t, obj: LocalObjective, cfg: ProtocolConfig, eig, u_inv, e_total, haar_set,
                    refine: bool, engine: str):
    """All extraction quantities at one time point.

    Returns ``(ErgotropyReport, [(policy, WorkStatistics)], refine trace)``.
    """
    rep = {"t": float(t), "e_total": float(e_total), "engine": engine}
    work = []
    trace = []
    pol = cfg.policies
    e_sub = subsystem_ergotropy(obj.rho, eig)
    price = switchoff_price(obj)
    rep.update(e_subsystem=e_sub, delta_so=price, e_switchoff=e_sub - price)
    if "agnostic" in pol:
        rep["e_agnostic"] = extracted_work(obj, u_inv)
        work.append(("agnostic", work_moments(obj, u_inv)))
    best_u = u_inv
    if "ansatz" in pol or "refined" in pol:
        angles, val = grid_search(obj.work, u_inv, cfg.optimizer)
        best_u = ansatz_unitary(angles, u_inv)
        if "ansatz" in pol:
            rep.update(e_ansatz=val, theta=angles.theta, phi=angles.phi)
            work.append(("ansatz", work_moments(obj, best_u)))
    if "haar" in pol:
        hs = haar_statistics(obj.work, haar_set)
        rep.update(e_haar_best=hs.best, haar_mean=hs.mean, haar_std=hs.std)
    if "refined" in pol and refine:
        res = refine_local(obj.work, cfg=cfg.optimizer, base=best_u)
        rep["e_refined"] = res.value
        work.append(("refined", work_moments(obj, res.unitary)))
        trace = [(float(t), k, v, x) for k, v, x in res.trace]
    return ErgotropyReport(**rep), work, trace


def run_engine(tag, cfg: ProtocolConfig, bath=None, timings=None) -> EngineRun:
    timings = {} if timings is None else timings
    bath = bath if bath is not None else discretize_bath(cfg.params, cfg.discretization)
    eng = _make_engine(tag, cfg, bath)
    eig = closed_eigensystem(cfg.params)
    u_c = charging_unitary(eig)
    u_inv = u_c.conj().T
    haar_set = haar_sample(cfg.optimizer.haar_samples, cfg.optimizer.seed) if "haar" in cfg.policies else None

    t0 = time.perf_counter()
    e_gs, ground = eng.ground()
    timings[f"{tag}.ground"] = time.perf_counter() - t0
    charged = charge(ground, u_c)
    e_c = eng.energy(charged)
    run = EngineRun(tag, float(e_gs), float(e_c))
    e_total = e_c - e_gs

    t_evolve = t_extract = 0.0
    t0 = time.perf_counter()
    for k, (t, state) in enumerate(eng.trajectory(charged)):
        t1 = time.perf_counter()
        t_evolve += t1 - t0
        obj = eng.objective(state)
        run.trajectory.append((t, eng.observables(state)))
        rep, work, trace = evaluate_sample(t, obj, cfg, eig, u_inv, e_total, haar_set,
                                           refine=(k % cfg.refine_every == 0), engine=tag)
        run.reports.append(rep)
        run.work.extend((t, p, w) for p, w in work)
        run.refine_trace.extend(trace)
        t0 = time.perf_counter()
        t_extract += t0 - t1
    timings[f"{tag}.evolve"] = t_evolve
    timings[f"{tag}.extract"] = t_extract
    run.warnings = list(getattr(eng, "warnings", []))
    return run


WORK_COLUMNS = ["t", "work", "second_moment", "variance", "rel_fluct", "rel_fluct_defined", "policy", "engine"]
TRAJECTORY_COLUMNS = ["t", "energy", "norm", "sz_total", "purity", "engine"]
TRACE_COLUMNS = ["t", "restart", "value"] + [f"x{k}" for k in range(15)] + ["engine"]


def _work_row(t, policy, w: WorkStatistics, engine):
    return [t, w.mean, w.second_moment, w.variance, w.rel_fluct, w.rel_fluct_defined, policy, engine]


def run_protocol(cfg: ProtocolConfig, out_dir=None, svg: bool = True) -> ProtocolResult:
    """Full run for every configured engine; writes outputs when ``out_dir`` is given.

    Outputs: ``ergotropy.csv``, ``work.csv``, ``trajectory.csv``,
    ``refine_trace.csv``, ``manifest.json`` and ``timings.json`` (plus SVG
    charts). Everything except ``timings.json`` is a deterministic function
    of the config.
    """
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    bath = discretize_bath(cfg.params, cfg.discretization)
    timings: dict[str, float] = {}
    runs: dict[str, EngineRun] = {}
    manifest = _manifest(cfg, bath)
    try:
        for tag in cfg.engines:
            runs[tag] = run_engine(tag, cfg, bath, timings)
            manifest["ground_energy"][tag] = runs[tag].ground_energy
            manifest["charged_energy"][tag] = runs[tag].charged_energy
            manifest["warnings"].extend(f"{tag}: {w}" for w in runs[tag].warnings)
            manifest["completed_engines"].append(tag)
    except Exception as exc:
        manifest["status"] = "failed"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        if out is not None:
            write_json(out / "timings.json", timings)
            write_json(out / "manifest.json", manifest)
        raise
    manifest["status"] = "ok"
    if out is not None:
        _write_outputs(out, runs, manifest, timings, svg)
    return ProtocolResult(cfg, runs, manifest, timings)


def _manifest(cfg: ProtocolConfig, bath):
    return {
        "program": "openbattery",
        "version": __version__,
        "config": cfg.to_dict(),
        "seeds": {"run": cfg.seed, "optimizer": cfg.optimizer.seed},
        "tolerances": {
            "krylov_residual": cfg.krylov.tol,
            "truncation_discarded_weight": cfg.truncation.discarded_weight,
            "max_bond": cfg.truncation.max_bond,
            "simplex_tol": cfg.optimizer.tol,
        },
        "bath": {"frequencies": bath.frequencies.tolist(), "couplings": bath.couplings.tolist()},
        "ground_energy": {},
        "charged_energy": {},
        "warnings": [],
        "completed_engines": [],
        "outputs": [],
        "timings_file": "timings.json",
    }


def _write_outputs(out: Path, runs, manifest, timings, svg):
    reps = [r for run in runs.values() for r in run.reports]
    write_csv(out / "ergotropy.csv", "openbattery.ergotropy", ErgotropyReport.columns(), [r.as_row() for r in reps])
    write_csv(out / "work.csv", "openbattery.work", WORK_COLUMNS,
              [_work_row(t, p, w, tag) for tag, run in runs.items() for t, p, w in run.work])
    write_csv(out / "trajectory.csv", "openbattery.trajectory", TRAJECTORY_COLUMNS,
              [[t, o["energy"], o["norm"], o["sz_total"], o["purity"], tag]
               for tag, run in runs.items() for t, o in run.trajectory])
    write_csv(out / "refine_trace.csv", "openbattery.refine_trace", TRACE_COLUMNS,
              [[t, k, v, *map(float, x), tag] for tag, run in runs.items() for t, k, v, x in run.refine_trace])
    files = ["ergotropy.csv", "work.csv", "trajectory.csv", "refine_trace.csv"]
    if svg:
        files += _plots(out, runs)
    manifest["outputs"] = files + ["timings.json"]
    write_json(out / "timings.json", timings)
    write_json(out / "manifest.json", manifest)


def _plots(out: Path, runs):
    series, fluct = {}, {}
    for tag, run in runs.items():
        t = np.array([r.t for r in run.reports])
        for name in ("e_agnostic", "e_ansatz", "e_switchoff", "haar_mean"):
            y = np.array([getattr(r, name) for r in run.reports])
            if np.isfinite(y).any():
                series[f"{name} ({tag})"] = (t, y)
        for policy in ("agnostic", "ansatz"):
            pts = [(tt, w.rel_fluct) for tt, p, w in run.work if p == policy]
            if pts:
                x, y = map(np.array, zip(*pts))
                fluct[f"{policy} ({tag})"] = (x, y)
    line_chart_svg(out / "ergotropy.svg", series, "time (1/Delta)", "extracted work (Delta)")
    files = ["ergotropy.svg"]
    if fluct:
        line_chart_svg(out / "fluctuations.svg", fluct, "time (1/Delta)", "sigma / W")
        files.append("fluctuations.svg")
    return files


# -- g sweep -------------------------------------------------------------------

SWEEP_COLUMNS = ["g", "e_local", "e_subsystem", "delta_so", "e_switchoff", "variance", "rel_fluct",
                 "singlet_population", "ground_energy", "engine"]


def singlet_population(rho, eig: ClosedEigensystem) -> float:
    s = eig.eigenvectors[:, 2]
    return float(np.real(s.conj() @ rho @ s))


def sweep_g(cfg: ProtocolConfig, g_values, out_dir=None, svg: bool = True):
    """t=0 quantities (no storage) for each coupling in ``g_values``.

    Returns a list of dict rows with the :data:`SWEEP_COLUMNS` keys.
    """
    g_values = [float(g) for g in g_values]
    if not g_values:
        raise ConfigError("empty g grid")
    if any(g < 0 for g in g_values):
        raise ConfigError("g values must be >= 0")
    rows = []
    for tag in cfg.engines:
        for g in g_values:
            c = cfg.replace(params=cfg.params.replace(g=g))
            bath = discretize_bath(c.params, c.discretization)
            eng = _make_engine(tag, c, bath)
            eig = closed_eigensystem(c.params)
            u_c = charging_unitary(eig)
            e_gs, ground = eng.ground()
            charged = charge(ground, u_c)
            obj = eng.objective(charged)
            e_sub = subsystem_ergotropy(obj.rho, eig)
            price = switchoff_price(obj)
            ws = work_moments(obj, u_c.conj().T)
            rows.append({
                "g": g, "e_local": extracted_work(obj, u_c.conj().T), "e_subsystem": e_sub, "delta_so": price,
                "e_switchoff": e_sub - price, "variance": ws.variance, "rel_fluct": ws.rel_fluct,
                "singlet_population": singlet_population(obj.rho, eig), "ground_energy": float(e_gs),
                "engine": tag,
            })
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "sweep.csv", "openbattery.sweep", SWEEP_COLUMNS, [[r[c] for c in SWEEP_COLUMNS] for r in rows])
        files = ["sweep.csv"]
        if svg:
            series = {}
            for tag in cfg.engines:
                sel = [r for r in rows if r["engine"] == tag]
                gs = np.array([r["g"] for r in sel])
                series[f"local ({tag})"] = (gs, np.array([r["e_local"] for r in sel]))
                series[f"switch-off ({tag})"] = (gs, np.array([r["e_switchoff"] for r in sel]))
            line_chart_svg(out / "sweep.svg", series, "g (Delta)", "ergotropy at t=0 (Delta)")
            files.append("sweep.svg")
        manifest = _manifest(cfg, discretize_bath(cfg.params, cfg.discretization))
        manifest.update(status="ok", g_values=g_values, outputs=files, timings_file=None)
        write_json(out / "manifest.json", manifest)
    return rows
