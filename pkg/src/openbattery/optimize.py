"""Searching for good extraction gates.

Three strategies, in increasing cost:

* an equally spaced grid over the two angles of the ferromagnetic-block
  ansatz ``U'(theta, phi)`` composed with the inverse charging gate,
* Haar-random two-qubit unitaries (a baseline with statistics),
* Nelder-Mead refinement over the 15 Pauli coefficients of
  ``exp(i sum x_ij s_i (x) s_j)``, composed on top of the best ansatz gate.

Objectives are plain callables on stacks of gates, ``f(us) -> values`` with
``us`` of shape (k, 4, 4); :func:`work_objective` builds one from a
:class:`~openbattery.ergotropy.LocalObjective`.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .ergotropy import LocalObjective
from .errors import ValidationError
from .model import ID2, SX, SY, SZ

log = logging.getLogger(__name__)

PAULI_BOUND = 2.0
_PAULIS = (ID2, SX, SY, SZ)
# (i, j) labels of the 15 generators, (0, 0) excluded; index = 4 i + j - 1
PAULI_LABELS = [(i, j) for i, j in itertools.product(range(4), range(4)) if (i, j) != (0, 0)]
PAULI_BASIS = np.array([np.kron(_PAULIS[i], _PAULIS[j]) for i, j in PAULI_LABELS])


@dataclass(frozen=True)
class AnsatzAngles:
    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi:
            raise ValidationError(f"theta={self.theta} outside [0, pi]")
        if not 0.0 <= self.phi < 2 * np.pi:
            raise ValidationError(f"phi={self.phi} outside [0, 2pi)")


@dataclass(frozen=True)
class PauliCoefficients:
    values: np.ndarray

    def __post_init__(self):
        x = np.array(self.values, dtype=float)
        if x.shape != (15,):
            raise ValidationError(f"expected 15 Pauli coefficients, got shape {x.shape}")
        if np.any(np.abs(x) > PAULI_BOUND):
            raise ValidationError(f"Pauli coefficients must lie in [-{PAULI_BOUND}, {PAULI_BOUND}]")
        x.setflags(write=False)
        object.__setattr__(self, "values", x)

    @classmethod
    def zeros(cls):
        return cls(np.zeros(15))

    def __getitem__(self, ij):
        return self.values[PAULI_LABELS.index(tuple(ij))]


@dataclass(frozen=True)
class OptimizerConfig:
    n_theta: int = 41
    n_phi: int = 81
    haar_samples: int = 100
    restarts: int = 16
    tol: float = 1e-8
    max_evals: int = 3000
    seed: int = 1234

    def __post_init__(self):
        for name in ("n_theta", "n_phi", "haar_samples", "max_evals"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")
        if self.restarts < 0 or self.tol <= 0:
            raise ValidationError("restarts must be >= 0 and tol > 0")

    def theta_grid(self):
        return np.linspace(0.0, np.pi, self.n_theta)

    def phi_grid(self):
        return np.linspace(0.0, 2 * np.pi, self.n_phi, endpoint=False)


# -- ansatz ------------------------------------------------------------------


def ansatz_block(theta, phi) -> np.ndarray:
    """``U'(theta, phi)``; broadcasts over array inputs to shape (..., 4, 4)."""
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(phi, dtype=float))
    s, c = np.sin(theta / 2), np.cos(theta / 2)
    u = np.zeros(theta.shape + (4, 4), dtype=complex)
    u[..., 0, 0] = np.exp(-1j * phi) * s
    u[..., 0, 3] = c
    u[..., 1, 1] = 1.0
    u[..., 2, 2] = 1.0
    u[..., 3, 0] = -c
    u[..., 3, 3] = np.exp(1j * phi) * s
    return u


def ansatz_unitary(angles: AnsatzAngles, charging_inverse) -> np.ndarray:
    return ansatz_block(angles.theta, angles.phi) @ np.asarray(charging_inverse)


def work_objective(obj: LocalObjective):
    """Vectorised extracted work ``us -> W(us)`` for one time point."""
    return obj.work


def grid_search(objective, charging_inverse, cfg: OptimizerConfig | None = None):
    """Exhaustive ansatz search; returns ``(AnsatzAngles, value)``.

    Ties go to the lexicographically smallest ``(theta, phi)``. The grid
    contains ``(pi, 0)``, where the ansatz equals the inverse charging gate.
    """
    cfg = cfg or OptimizerConfig()
    th, ph = np.meshgrid(cfg.theta_grid(), cfg.phi_grid(), indexing="ij")
    us = ansatz_block(th.ravel(), ph.ravel()) @ np.asarray(charging_inverse)
    vals = np.asarray(objective(us), dtype=float)
    k = int(np.argmax(vals))  # first maximum in theta-major order
    return AnsatzAngles(float(th.flat[k]), float(ph.flat[k])), float(vals[k])


# -- Haar baseline -------------------------------------------------------------


@dataclass(frozen=True)
class HaarStatistics:
    best: float
    mean: float
    std: float


def haar_sample(count: int, seed: int) -> np.ndarray:
    """``count`` Haar-random 4x4 unitaries, stacked as (count, 4, 4)."""
    if count < 1:
        raise ValidationError("count must be >= 1")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((count, 4, 4)) + 1j * rng.standard_normal((count, 4, 4))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def haar_statistics(objective, samples) -> HaarStatistics:
    samples = np.asarray(samples)
    if samples.ndim != 3 or samples.shape[0] < 2:
        raise ValidationError("need a stack of at least 2 sampled gates")
    vals = np.asarray(objective(samples), dtype=float)
    return HaarStatistics(float(vals.max()), float(vals.mean()), float(vals.std(ddof=1)))


# -- Pauli refinement ----------------------------------------------------------


def pauli_unitary(x) -> np.ndarray:
    """``exp(i sum_ij x_ij s_i (x) s_j)`` via eigendecomposition of the generator."""
    if isinstance(x, PauliCoefficients):
        x = x.values
    x = np.asarray(x, dtype=float)
    if x.shape != (15,):
        raise ValidationError(f"expected 15 Pauli coefficients, got shape {x.shape}")
    gen = np.tensordot(x, PAULI_BASIS, axes=1)
    w, v = np.linalg.eigh(gen)
    return (v * np.exp(1j * w)) @ v.conj().T


@dataclass
class RefineResult:
    x: PauliCoefficients
    value: float
    unitary: np.ndarray
    converged: bool
    n_evals: int
    trace: list = field(default_factory=list)  # (restart, value, x) rows


def refine_local(objective, start: PauliCoefficients | None = None, cfg: OptimizerConfig | None = None,
                 base=None) -> RefineResult:
    """Maximise ``objective(U(x) @ base)`` over the Pauli box.

    The first simplex starts at ``start`` (default ``x = 0``, i.e. ``base``
    itself), the others at uniform random points of the box. Returns the best
    point seen; ``converged`` is False if the run that produced it hit the
    evaluation budget.
    """
    cfg = cfg or OptimizerConfig()
    base = np.eye(4, dtype=complex) if base is None else np.asarray(base)
    x0 = np.zeros(15) if start is None else PauliCoefficients(start.values if isinstance(start, PauliCoefficients)
                                                            else start).values
    rng = np.random.default_rng(cfg.seed)
    starts = [np.array(x0)] + [rng.uniform(-PAULI_BOUND, PAULI_BOUND, 15) for _ in range(cfg.restarts)]

    def cost(x):
        return -float(objective((pauli_unitary(x) @ base)[None])[0])

    best_x, best_val, best_ok = np.array(x0), -cost(x0), True
    evals, trace = 1, [(0, best_val, best_x.copy())]
    bounds = [(-PAULI_BOUND, PAULI_BOUND)] * 15
    for k, xs in enumerate(starts):
        res = minimize(cost, xs, method="Nelder-Mead", bounds=bounds,
                       options={"xatol": cfg.tol, "fatol": cfg.tol, "maxfev": cfg.max_evals, "adaptive": True})
        evals += res.nfev
        val = -float(res.fun)
        trace.append((k, val, np.array(res.x)))
        if val > best_val:
            best_x, best_val, best_ok = np.clip(res.x, -PAULI_BOUND, PAULI_BOUND), val, bool(res.success)
    if not best_ok:
        log.info("refinement hit its evaluation budget (best %.10f)", best_val)
    u = pauli_unitary(best_x) @ base
    return RefineResult(PauliCoefficients(best_x), best_val, u, best_ok, evals, trace)
