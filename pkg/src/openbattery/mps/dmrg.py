"""Two-site DMRG."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from ..errors import ConsistencyError, ValidationError
from .contract import boundary, extend_left, extend_right, two_site_operator
from .measure import mpo_expectation, mpo_variance
from .mpo import MatrixProductOperator
from .state import MatrixProductState, truncated_svd

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TruncationPolicy:
    max_bond: int = 64
    discarded_weight: float = 1e-9

    def __post_init__(self):
        if self.max_bond <= 0 or self.discarded_weight <= 0:
            raise ValidationError("truncation policy values must be strictly positive")


@dataclass
class DMRGResult:
    energy: float
    state: MatrixProductState
    variance: float
    sweep_energies: list = field(default_factory=list)
    max_discarded: float = 0.0


def _lowest_eigvec(matvec, theta):
    dim = theta.size
    shape = theta.shape
    if dim <= 256:
        h = np.empty((dim, dim), dtype=complex)
        eye = np.eye(dim, dtype=complex)
        for k in range(dim):
            h[:, k] = matvec(eye[k].reshape(shape)).ravel()
        evals, evecs = np.linalg.eigh(0.5 * (h + h.conj().T))
        return evals[0], evecs[:, 0].reshape(shape)
    op = LinearOperator((dim, dim), matvec=lambda v: matvec(v.reshape(shape)).ravel(), dtype=complex)
    v0 = theta.ravel()
    try:
        evals, evecs = eigsh(op, k=1, which="SA", v0=v0, tol=1e-13, ncv=min(dim - 1, 24), maxiter=2000)
    except ArpackNoConvergence as exc:
        if not len(exc.eigenvalues):
            raise
        evals, evecs = exc.eigenvalues, exc.eigenvectors
    return evals[0], evecs[:, 0].reshape(shape)


def dmrg_ground_state(mpo: MatrixProductOperator, policy: TruncationPolicy | None = None, sweeps: int = 10,
                      bias_epsilon: float = 0.0, initial: MatrixProductState | None = None, seed: int = 0,
                      tol: float = 1e-12) -> DMRGResult:
    """Ground state of ``mpo`` by two-site DMRG.

    The search runs on ``mpo`` tilted by ``-bias_epsilon (sz1 + sz2)``; the
    reported energy is for ``mpo`` itself, the variance for the tilted operator
    (it measures how close the state is to an eigenstate of what was solved). Stops early once a
    full sweep lowers the energy by less than ``tol``.
    """
    if sweeps < 1:
        raise ValidationError("sweeps must be >= 1")
    policy = policy or TruncationPolicy()
    solve_mpo = mpo.with_qubit_field(bias_epsilon) if bias_epsilon else mpo
    ws = solve_mpo.tensors
    n = len(ws)
    if initial is None:
        psi = MatrixProductState.random([w.shape[1] for w in ws], bond=min(8, policy.max_bond), seed=seed)
    else:
        psi = initial.copy()
    psi.canonicalize(0)

    # right environments for sites k+1.. (index k holds env right of site k)
    right = [None] * n
    right[n - 1] = boundary()
    for k in range(n - 1, 0, -1):
        right[k - 1] = extend_right(right[k], psi.tensors[k], ws[k])
    left = [None] * n
    left[0] = boundary()

    energies = []
    max_disc = 0.0
    for sweep in range(sweeps):
        # left to right
        for k in range(n - 1):
            e, max_disc = _update_bond(psi, ws, left, right, k, policy, max_disc, direction=+1)
        # right to left
        for k in range(n - 2, -1, -1):
            e, max_disc = _update_bond(psi, ws, left, right, k, policy, max_disc, direction=-1)
        e_sweep = mpo_expectation(psi, solve_mpo)
        log.debug("sweep %d energy %.12f bonds %s", sweep + 1, e_sweep, psi.bond_dims)
        if energies and e_sweep > energies[-1] + 1e-10 * max(1.0, abs(energies[-1])):
            raise ConsistencyError(
                f"DMRG energy rose from {energies[-1]:.12f} to {e_sweep:.12f} in sweep {sweep + 1}"
            )
        energies.append(e_sweep)
        if len(energies) > 1 and energies[-2] - energies[-1] < tol:
            break
    energy = mpo_expectation(psi, mpo)
    var = mpo_variance(psi, solve_mpo)
    return DMRGResult(energy, psi, var, energies, max_disc)


def _update_bond(psi, ws, left, right, k, policy, max_disc, direction):
    a, b = psi.tensors[k], psi.tensors[k + 1]
    theta = np.tensordot(a, b, axes=([2], [0]))
    mv = two_site_operator(left[k], ws[k], ws[k + 1], right[k + 1])
    e, theta = _lowest_eigvec(mv, theta)
    dl, d1, d2, dr = theta.shape
    u, s, vh, disc = truncated_svd(theta.reshape(dl * d1, d2 * dr), policy.max_bond, policy.discarded_weight)
    s = s / np.linalg.norm(s)
    max_disc = max(max_disc, disc)
    if direction > 0:
        psi.tensors[k] = u.reshape(dl, d1, -1)
        psi.tensors[k + 1] = (s[:, None] * vh).reshape(-1, d2, dr)
        psi.center = k + 1
        left[k + 1] = extend_left(left[k], psi.tensors[k], ws[k])
    else:
        psi.tensors[k] = (u * s).reshape(dl, d1, -1)
        psi.tensors[k + 1] = vh.reshape(-1, d2, dr)
        psi.center = k
        right[k] = extend_right(right[k + 1], psi.tensors[k + 1], ws[k + 1])
    return float(e), max_disc
