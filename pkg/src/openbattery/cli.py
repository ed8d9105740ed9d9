"""Command-line front end.

    openbattery ground          ground energies (+ state snapshots)
    openbattery protocol        charge / store / extract run, CSV + SVG
    openbattery sweep           t=0 quantities over a grid of couplings g
    openbattery export-circuit  CNOT + U3 circuit of the charging gate

Exit codes: 0 ok, 2 config or usage error, 3 convergence failure,
4 problem too large for the chosen engine.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .circuit import circuit_export, phase_distance
from .errors import CapacityError, ConfigError, ConvergenceError
from .exact import write_state
from .io import write_csv, write_json
from .model import closed_eigensystem, discretize_bath
from .mps import write_mps
from .protocol import DEFAULT_SEED, ProtocolConfig, _make_engine, charging_unitary, run_protocol, sweep_g

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_CAPACITY = 0, 2, 3, 4
DEFAULT_G_GRID = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8"


class UsageError(Exception):
    pass


def _diagnostic(kind, message, **extra):
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)


def load_config(path) -> ProtocolConfig:
    if path is None:
        return ProtocolConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return ProtocolConfig.from_json(text)


def _apply_flags(cfg: ProtocolConfig, args) -> ProtocolConfig:
    changes = {}
    if args.engine is not None:
        changes["engine"] = args.engine
    if args.seed is not None:
        changes["seed"] = args.seed
        changes["optimizer"] = dataclasses.replace(cfg.optimizer, seed=args.seed)
    return cfg.replace(**changes) if changes else cfg


def _parse_grid(text):
    vals = [t for t in (s.strip() for s in text.split(",")) if t]
    if not vals:
        raise UsageError("empty g grid")
    try:
        return [float(v) for v in vals]
    except ValueError as exc:
        raise UsageError(f"bad g grid {text!r}") from exc


def cmd_ground(cfg: ProtocolConfig, out: Path, args):
    bath = discretize_bath(cfg.params, cfg.discretization)
    summary = {"engines": {}, "units": "Delta"}
    for tag in cfg.engines:
        energy, state = _make_engine(tag, cfg, bath).ground()
        name = f"ground_{tag}.bin"
        if tag == "exact":
            write_state(out / name, state)
        else:
            write_mps(out / name, state)
        summary["engines"][tag] = {"energy": float(energy), "snapshot": name}
    if len(summary["engines"]) == 2:
        e1, e2 = (summary["engines"][t]["energy"] for t in ("exact", "mps"))
        summary["relative_difference"] = abs(e1 - e2) / abs(e1)
    print(json.dumps(summary, sort_keys=True))


def cmd_protocol(cfg: ProtocolConfig, out: Path, args):
    res = run_protocol(cfg, out, svg=args.svg == "on")
    print(json.dumps({"status": res.manifest["status"], "out_dir": str(out), "outputs": res.manifest["outputs"],
                      "ground_energy": res.manifest["ground_energy"], "warnings": len(res.manifest["warnings"])},
                     sort_keys=True))


def cmd_sweep(cfg: ProtocolConfig, out: Path, args):
    grid = _parse_grid(args.g_grid)
    rows = sweep_g(cfg, grid, out, svg=args.svg == "on")
    print(json.dumps({"rows": rows}, sort_keys=True))


def cmd_export_circuit(cfg: ProtocolConfig, out: Path, args):
    if args.gate == "charging":
        u = charging_unitary(closed_eigensystem(cfg.params))
    else:
        try:
            u = np.load(args.gate)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load gate from {args.gate}: {exc}") from exc
    seq = circuit_export(u, seed=cfg.seed % 2**32)
    write_csv(out / "circuit.csv", "openbattery.circuit", ["kind", "a", "b", "theta", "phi", "lam"], seq.to_rows())
    print(json.dumps({"cx_count": seq.cx_count, "elements": len(seq.elements),
                      "reconstruction_error": phase_distance(seq.to_unitary(), u), "file": "circuit.csv"},
                     sort_keys=True))


COMMANDS = {"ground": cmd_ground, "protocol": cmd_protocol, "sweep": cmd_sweep, "export-circuit": cmd_export_circuit}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (defaults apply when omitted)")
    common.add_argument("--engine", choices=["exact", "mps", "both"])
    common.add_argument("--seed", type=int, help=f"RNG seed (config value, default {DEFAULT_SEED})")
    common.add_argument("--out-dir", default=".", help="output directory (created if needed)")
    common.add_argument("--svg", choices=["on", "off"], default="on")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="openbattery", description="Two-qubit open quantum battery simulator.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("ground", parents=[common], help="ground-state energies")
    sub.add_parser("protocol", parents=[common], help="charge, store and extract")
    sp = sub.add_parser("sweep", parents=[common], help="t=0 ergotropies over a g grid")
    sp.add_argument("--g-grid", default=DEFAULT_G_GRID, help="comma-separated couplings g (units Delta)")
    ep = sub.add_parser("export-circuit", parents=[common], help="decompose a gate into CNOTs and rotations")
    ep.add_argument("--gate", default="charging", help="'charging' or a .npy file holding a 4x4 unitary")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        cfg = _apply_flags(load_config(args.config), args)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, args)
    except json.JSONDecodeError as exc:
        _diagnostic("config", exc.msg, file=args.config, line=exc.lineno, column=exc.colno)
        return EXIT_CONFIG
    except (ConfigError, UsageError) as exc:
        _diagnostic("config" if isinstance(exc, ConfigError) else "usage", str(exc))
        return EXIT_CONFIG
    except ConvergenceError as exc:
        _diagnostic("convergence", str(exc), residual=getattr(exc, "residual", None))
        return EXIT_CONVERGENCE
    except CapacityError as exc:
        _diagnostic("capacity", str(exc))
        return EXIT_CAPACITY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
