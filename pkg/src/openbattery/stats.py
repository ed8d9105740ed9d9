"""Work statistics of a sudden local quench ``H -> (u x 1)^+ H (u x 1)``.

Only the first two moments of the quasiprobability work distribution are
needed. With ``D = (u x 1)^+ H (u x 1) - H`` the mean work is ``-<D>``
(positive when work is extracted) and the variance is ``<D^2> - <D>^2``.

Because ``u`` acts on the qubits only, ``D = A (x) 1 + B (x) X`` with
``A = u^+ H_S u - H_S``, ``B = u^+ Sz u - Sz`` and ``X`` the bath quadrature
sum, so both moments follow from the 4x4 reduction (rho, chi, chi2). For
state vectors :func:`work_moments_exact` evaluates ``||D psi||^2`` directly
as an independent route.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ergotropy import LocalObjective, check_unitary
from .exact import HamiltonianTerms, PureStateVector
from .model import SZ_TOTAL

REL_FLUCT_MIN_WORK = 1e-6


@dataclass(frozen=True)
class WorkStatistics:
    mean: float
    second_moment: float
    variance: float
    rel_fluct: float
    rel_fluct_defined: bool

    @classmethod
    def from_moments(cls, mean, second):
        var = second - mean**2
        ok = mean > REL_FLUCT_MIN_WORK
        rel = float(np.sqrt(max(var, 0.0)) / mean) if ok else float("nan")
        return cls(float(mean), float(second), float(var), rel, bool(ok))

    @property
    def std(self):
        return float(np.sqrt(max(self.variance, 0.0)))


def _tr(a, b):
    return float(np.real(np.einsum("ij,ji->", a, b)))


def work_moments(obj: LocalObjective, u) -> WorkStatistics:
    """Mean work and variance for gate ``u`` from the 4x4 reduction."""
    u = check_unitary(u, 1e-10)
    ud = u.conj().T
    a = ud @ obj.h_system @ u - obj.h_system
    b = ud @ SZ_TOTAL @ u - SZ_TOTAL
    d1 = _tr(a, obj.rho) + _tr(b, obj.chi)
    d2 = _tr(a @ a, obj.rho) + _tr(a @ b + b @ a, obj.chi) + _tr(b @ b, obj.chi2)
    return WorkStatistics.from_moments(-d1, d2)


def work_moments_exact(state: PureStateVector, H: HamiltonianTerms, u) -> WorkStatistics:
    """Same quantity through ``D|psi>`` on the full state vector."""
    u = check_unitary(u, 1e-10)
    psi = state.amplitudes
    rotated = state.apply_local(u)
    m = H.matvec(rotated.amplitudes).reshape(-1, 4) @ u.conj()
    d_psi = m.ravel() - H.matvec(psi)
    d1 = float(np.real(np.vdot(psi, d_psi)))
    d2 = float(np.real(np.vdot(d_psi, d_psi)))
    return WorkStatistics.from_moments(-d1, d2)


def fluctuation_series(trajectory, policy):
    """Work statistics along a trajectory.

    ``trajectory`` yields ``(t, LocalObjective)``; ``policy`` is a fixed 4x4
    gate or a callable ``(t, obj) -> gate`` (e.g. a per-time optimiser).
    Returns a list of ``(t, WorkStatistics)``.
    """
    pick = policy if callable(policy) else (lambda t, obj: policy)
    return [(float(t), work_moments(obj, pick(t, obj))) for t, obj in trajectory]
