"""Ergotropic quantities of the two-qubit battery.

Everything here works on a :class:`LocalObjective`, the 4x4 reduction of a
compound state that both engines produce. A qubit gate ``U`` moves the
compound energy to ``tr(U rho U^+ H_S) + tr(U chi U^+ Sz) + e_const``; the
bath energy ``e_const`` is untouched by gates on the qubits.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import SZ_TOTAL, ClosedEigensystem

UNITARY_TOL = 1e-12


def check_unitary(u, tol=UNITARY_TOL):
    u = np.asarray(u, dtype=complex)
    if u.shape != (4, 4):
        raise ValidationError(f"expected a 4x4 gate, got shape {u.shape}")
    err = np.abs(u.conj().T @ u - np.eye(4)).max()
    if err > tol:
        raise ValidationError(f"gate is not unitary (|U^+U - 1| = {err:.2e})")
    return u


@dataclass(frozen=True)
class LocalObjective:
    rho: np.ndarray
    chi: np.ndarray
    chi2: np.ndarray
    e_const: float
    h_system: np.ndarray

    def energy(self, u=None) -> float:
        """Compound energy after applying ``u`` (identity if None) on the qubits."""
        if u is None:
            return float(np.real(np.trace(self.rho @ self.h_system) + np.trace(self.chi @ SZ_TOTAL)) + self.e_const)
        return float(self.energies(np.asarray(u)[None])[0])

    def energies(self, us) -> np.ndarray:
        """Vectorised :meth:`energy` over a stack of gates of shape (k, 4, 4)."""
        us = np.asarray(us)
        rot_rho = us @ self.rho @ us.conj().transpose(0, 2, 1)
        rot_chi = us @ self.chi @ us.conj().transpose(0, 2, 1)
        e_sys = np.einsum("kij,ji->k", rot_rho, self.h_system).real
        sz = np.real(np.diag(SZ_TOTAL))
        e_int = np.einsum("kii,i->k", rot_chi, sz).real
        return e_sys + e_int + self.e_const

    def work(self, us) -> np.ndarray:
        return self.energy() - self.energies(us)

    @property
    def interaction_energy(self) -> float:
        return float(np.real(np.trace(self.chi @ SZ_TOTAL)))


@dataclass(frozen=True)
class ErgotropyReport:
    t: float
    e_agnostic: float = float("nan")
    e_ansatz: float = float("nan")
    theta: float = float("nan")
    phi: float = float("nan")
    e_haar_best: float = float("nan")
    haar_mean: float = float("nan")
    haar_std: float = float("nan")
    e_refined: float = float("nan")
    e_subsystem: float = float("nan")
    delta_so: float = float("nan")
    e_switchoff: float = float("nan")
    e_total: float = float("nan")
    engine: str = "exact"

    @classmethod
    def columns(cls):
        return [f.name for f in dataclasses.fields(cls)]

    def as_row(self):
        return [getattr(self, c) for c in self.columns()]


def global_ergotropy_pure(energy: float, ground_energy: float) -> float:
    # a pure state's passive counterpart is the ground state
    return energy - ground_energy


def subsystem_ergotropy(rho, eig: ClosedEigensystem | np.ndarray) -> float:
    """Ergotropy of ``rho`` with respect to the isolated qubit Hamiltonian.

    ``eig`` is either the closed eigensystem or the 4x4 Hamiltonian itself.
    """
    rho = np.asarray(rho, dtype=complex)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > 1e-8:
        raise ValidationError(f"density matrix trace is {tr!r}, expected 1")
    if isinstance(eig, ClosedEigensystem):
        levels = np.sort(eig.energies)
        h = (eig.eigenvectors * eig.energies) @ eig.eigenvectors.conj().T
    else:
        h = np.asarray(eig)
        levels = np.linalg.eigvalsh(h)
    pops = np.sort(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)), kind="stable")[::-1]
    return float(np.real(np.trace(rho @ h)) - pops @ levels)


def switchoff_price(obj: LocalObjective) -> float:
    """Energy cost of quenching the qubit-bath coupling, ``-<V_SE>``."""
    return -obj.interaction_energy


def switchoff_ergotropy(obj: LocalObjective, eig: ClosedEigensystem | np.ndarray | None = None) -> float:
    eig = obj.h_system if eig is None else eig
    return subsystem_ergotropy(obj.rho, eig) - switchoff_price(obj)


def extracted_work(obj: LocalObjective, u) -> float:
    """Average work extracted by the gate ``u`` (a lower bound on local ergotropy)."""
    u = check_unitary(u, 1e-10)
    return float(obj.work(u[None])[0])
