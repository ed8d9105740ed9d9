"""Expectation values and reduced objects of an MPS."""

from __future__ import annotations

import numpy as np

from ..ergotropy import LocalObjective
from ..errors import ValidationError
from ..exact import boson_ops
from ..model import DiscretizedBath, ModelParams, system_hamiltonian
from .contract import boundary, extend_left
from .mpo import MatrixProductOperator, bath_reduction, bath_sum_mpo, mpo_product
from .state import MatrixProductState


def mpo_expectation(psi: MatrixProductState, mpo: MatrixProductOperator) -> float:
    env = boundary()
    for a, w in zip(psi.tensors, mpo.tensors):
        env = extend_left(env, a, w)
    return float(env[0, 0, 0].real)


def mpo_variance(psi: MatrixProductState, mpo: MatrixProductOperator) -> float:
    """``<H^2> - <H>^2``, normalised by ``<psi|psi>``."""
    sq = MatrixProductOperator(mpo_product(mpo.tensors, mpo.tensors))
    nrm2 = psi.norm() ** 2
    e = mpo_expectation(psi, mpo) / nrm2
    return mpo_expectation(psi, sq) / nrm2 - e**2


def expectation(psi: MatrixProductState, observable) -> complex | float:
    """``<psi|O|psi>`` for an MPO or a list of ``(site, operator)`` pairs.

    A list means the product of the given site-local operators, identity
    elsewhere; an empty list therefore gives the squared norm.
    """
    if isinstance(observable, MatrixProductOperator):
        if len(observable) != len(psi):
            raise ValidationError(f"MPO has {len(observable)} sites, state has {len(psi)}")
        return mpo_expectation(psi, observable)
    ops = {}
    for site, op in observable:
        if not 0 <= site < len(psi):
            raise ValidationError(f"site {site} outside chain of length {len(psi)}")
        op = np.asarray(op)
        if op.shape != (psi.local_dims[site],) * 2:
            raise ValidationError(f"operator on site {site} has shape {op.shape}")
        ops[site] = op @ ops[site] if site in ops else op
    env = np.ones((1, 1), dtype=complex)
    for k, a in enumerate(psi.tensors):
        ket = a if k not in ops else np.tensordot(ops[k], a, axes=([1], [1])).transpose(1, 0, 2)
        env = np.tensordot(env, ket, axes=([1], [0]))
        env = np.tensordot(a.conj(), env, axes=([0, 1], [0, 1]))
    val = env[0, 0]
    return float(val.real) if abs(val.imag) < 1e-14 else complex(val)


def _qubit_block(psi: MatrixProductState):
    """Two-qubit block ``theta[q, b]`` with the bath sites right-canonical."""
    c = psi.copy().canonicalize(1)
    theta = np.tensordot(c.tensors[0], c.tensors[1], axes=([2], [0]))  # 1 s1 s2 b
    return c, theta.reshape(4, -1)


def effective_local_objective(psi: MatrixProductState, params: ModelParams, bath: DiscretizedBath) -> LocalObjective:
    """4x4 reduction of the state used for every extraction quantity."""
    c, theta = _qubit_block(psi)
    n = params.fock_cutoff
    _, x = boson_ops(n)
    num = np.diag(np.arange(n, dtype=float))
    bath_sites = c.tensors[2:]
    xs = bath_sum_mpo([lam * x for lam in bath.couplings])
    es = bath_sum_mpo([w * num for w in bath.frequencies])
    m_x = bath_reduction(bath_sites, xs)
    m_x2 = bath_reduction(bath_sites, mpo_product(xs, xs))
    m_e = bath_reduction(bath_sites, es)
    # chi[q, q'] = sum theta[q, b'] M[b, b'] conj(theta[q', b])
    rho = theta @ theta.conj().T
    chi = theta @ m_x.T @ theta.conj().T
    chi2 = theta @ m_x2.T @ theta.conj().T
    e_bath = float(np.real(np.trace(theta @ m_e.T @ theta.conj().T)))
    herm = lambda a: 0.5 * (a + a.conj().T)
    return LocalObjective(rho=herm(rho), chi=herm(chi), chi2=herm(chi2), e_const=e_bath,
                          h_system=system_hamiltonian(params))


def reduce_to_qubits(psi: MatrixProductState) -> np.ndarray:
    _, theta = _qubit_block(psi)
    rho = theta @ theta.conj().T
    return 0.5 * (rho + rho.conj().T)
