"""State-vector engine for the qubits-plus-bath compound.

Basis index of a product state is ``q + 4 * (m_1 + n*m_2 + n^2*m_3 + ...)``
with ``q`` the two-qubit index in (uu, ud, du, dd) and ``m_i`` the occupation
of mode ``i``. Reshaping an amplitude vector to ``(n**N, 4)`` therefore
puts the bath on rows and the qubits on columns, which is how every
operator here is applied.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import CapacityError, ConvergenceError, ValidationError
from .krylov import expm_krylov
from .model import SZ_TOTAL, DiscretizedBath, ModelParams, effective_bias, system_hamiltonian
from .ergotropy import LocalObjective

# largest state-vector length we agree to allocate (2**27 complex = 2 GiB)
MAX_DIMENSION = 2**27

SZ_DIAG = np.real(np.diag(SZ_TOTAL))


def boson_ops(n):
    """Truncated annihilation operator and quadrature ``b + b^dagger`` (n x n)."""
    b = np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1)
    return b, b + b.T


@dataclass(frozen=True)
class PureStateVector:
    amplitudes: np.ndarray
    n_modes: int
    fock_cutoff: int

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=complex)
        expected = 4 * self.fock_cutoff**self.n_modes
        if amps.shape != (expected,):
            raise ValidationError(f"state has shape {amps.shape}, expected ({expected},)")
        nrm = np.linalg.norm(amps)
        if abs(nrm - 1.0) > 1e-10:
            raise ValidationError(f"state norm {nrm!r} differs from 1 by more than 1e-10")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self):
        return self.amplitudes.size

    def matrix(self):
        """Amplitudes as a (bath, qubit) matrix."""
        return self.amplitudes.reshape(-1, 4)

    @classmethod
    def product(cls, qubits, n_modes, fock_cutoff, bath=None):
        """``|qubits> (x) |bath>``; the bath defaults to the vacuum."""
        if bath is None:
            bath = np.zeros(fock_cutoff**n_modes, dtype=complex)
            bath[0] = 1.0
        amps = np.kron(np.asarray(bath, dtype=complex), np.asarray(qubits, dtype=complex))
        return cls(amps / np.linalg.norm(amps), n_modes, fock_cutoff)

    def apply_local(self, u):
        """``(u (x) 1_E) |psi>`` for a 4x4 gate ``u`` on the qubits."""
        return PureStateVector((self.matrix() @ np.asarray(u).T).ravel(), self.n_modes, self.fock_cutoff)


@dataclass(frozen=True)
class KrylovConfig:
    subspace_dim: int = 30
    dt: float = 0.02
    tol: float = 1e-10
    max_restarts: int = 8

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt must be > 0")
        if self.subspace_dim < 2:
            raise ValidationError("subspace_dim must be >= 2")


class HamiltonianTerms:
    """Structured Hamiltonian ``H_S + H_E + V_SE (+ bias)``.

    Each part acts on an amplitude vector without forming the full matrix:
    ``H_S`` and the bias act on the qubit columns, ``H_E`` is diagonal on the
    bath rows and ``V_SE`` is the sparse bath quadrature times the diagonal
    qubit magnetisation.
    """

    def __init__(self, params: ModelParams, bath: DiscretizedBath):
        if bath.n_modes != params.n_modes:
            raise ValidationError("bath mode count does not match params.n_modes")
        n, nm = params.fock_cutoff, params.n_modes
        dim = 4 * n**nm
        if dim > MAX_DIMENSION:
            raise CapacityError(f"Hilbert-space dimension 4*{n}^{nm} = {dim} exceeds {MAX_DIMENSION}")
        self.params = params
        self.bath = bath
        self.dim = dim
        self.bath_dim = n**nm
        self.h_system = system_hamiltonian(params)
        self.bias_epsilon = effective_bias(params)

        occ = np.arange(n, dtype=float)
        _, x = boson_ops(n)
        energy = np.zeros(1)
        quad = sp.csr_matrix((1, 1), dtype=float)
        # build mode by mode; mode 1 is the fastest bath index so new modes
        # are prepended on the left of each Kronecker product
        for i in range(nm):
            lam = bath.couplings[i]
            w = bath.frequencies[i]
            energy = np.add.outer(w * occ, energy).ravel()
            quad = sp.kron(sp.identity(n), quad, format="csr") + lam * sp.kron(
                sp.csr_matrix(x), sp.identity(n**i), format="csr"
            )
        self.bath_energies = energy
        self.bath_quadrature = quad.tocsr()
        self.bath_quadrature.eliminate_zeros()

    # -- parts -------------------------------------------------------------

    def _mat(self, v):
        return np.asarray(v).reshape(self.bath_dim, 4)

    def apply_system(self, v):
        return (self._mat(v) @ self.h_system.T).ravel()

    def apply_bath(self, v):
        return (self.bath_energies[:, None] * self._mat(v)).ravel()

    def apply_interaction(self, v):
        return ((self.bath_quadrature @ self._mat(v)) * SZ_DIAG).ravel()

    def apply_bias(self, v):
        return (-self.bias_epsilon * self._mat(v) * SZ_DIAG).ravel()

    def matvec(self, v, bias=False):
        m = self._mat(v)
        out = m @ self.h_system.T
        out += self.bath_energies[:, None] * m
        out += (self.bath_quadrature @ m) * SZ_DIAG
        if bias:
            out -= self.bias_epsilon * m * SZ_DIAG
        return out.ravel()

    def linear_operator(self, bias=False):
        return LinearOperator(
            (self.dim, self.dim), matvec=lambda v: self.matvec(v, bias), dtype=complex
        )

    def expectation(self, state: PureStateVector, bias=False) -> float:
        v = state.amplitudes
        return float(np.vdot(v, self.matvec(v, bias)).real)

    def to_sparse(self, bias=False):
        """Full sparse matrix; meant for small instances and oracles."""
        hs = sp.kron(sp.identity(self.bath_dim), sp.csr_matrix(self.h_system))
        he = sp.kron(sp.diags(self.bath_energies), sp.identity(4))
        v = sp.kron(self.bath_quadrature, sp.diags(SZ_DIAG))
        h = hs + he + v
        if bias:
            h = h - self.bias_epsilon * sp.kron(sp.identity(self.bath_dim), sp.diags(SZ_DIAG))
        return h.tocsr()


def assemble_hamiltonian(params: ModelParams, bath: DiscretizedBath) -> HamiltonianTerms:
    return HamiltonianTerms(params, bath)


def _fix_phase(v):
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def ground_state_lanczos(H: HamiltonianTerms, cfg: KrylovConfig | None = None, seed: int = 0,
                         bias: bool = True, residual_tol: float = 1e-8):
    """Ground state of ``H`` (optionally tilted by the bias field).

    The bias only steers which branch is found; the returned energy is
    ``<psi|H|psi>`` without it. The global phase is fixed so the largest
    amplitude is real and positive.
    """
    cfg = cfg or KrylovConfig()
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(H.dim) + 1j * rng.standard_normal(H.dim)
    op = H.linear_operator(bias)
    ncv = min(H.dim - 1, max(2 * cfg.subspace_dim, 20))
    residual = np.inf
    for attempt in range(cfg.max_restarts + 1):
        if H.dim <= 64:
            dense = H.to_sparse(bias).toarray()
            evals, evecs = np.linalg.eigh(dense)
            e, psi = evals[0], evecs[:, 0]
        else:
            evals, evecs = eigsh(op, k=1, which="SA", v0=v0, ncv=ncv, tol=1e-14, maxiter=100 * H.dim)
            e, psi = evals[0], evecs[:, 0]
        psi = psi / np.linalg.norm(psi)
        residual = np.linalg.norm(H.matvec(psi, bias) - e * psi)
        if residual <= residual_tol:
            break
        v0 = psi
        ncv = min(H.dim - 1, 2 * ncv)
    else:
        raise ConvergenceError(f"Lanczos ground state residual {residual:.3e} > {residual_tol:.1e}", residual)
    state = PureStateVector(_fix_phase(psi), H.params.n_modes, H.params.fock_cutoff)
    return H.expectation(state), state


def evolve_krylov(state: PureStateVector, H: HamiltonianTerms, cfg: KrylovConfig | None = None,
                  horizon: float = 20.0, sample_every: int = 1) -> Iterator[tuple[float, PureStateVector]]:
    """Yield ``(t, psi(t))`` for ``t = 0, dt, 2 dt, ...`` up to ``horizon``.

    Propagates with the unbiased Hamiltonian. Only every ``sample_every``-th
    step is yielded; the initial state is always yielded.
    """
    cfg = cfg or KrylovConfig()
    n_steps = int(round(horizon / cfg.dt))
    v = state.amplitudes.copy()
    yield 0.0, state
    matvec = H.matvec
    for k in range(1, n_steps + 1):
        v = expm_krylov(matvec, v, cfg.dt, cfg.subspace_dim, cfg.tol, cfg.max_restarts)
        # Lanczos is unitary only to the Krylov tolerance; renormalising
        # stops the drift from accumulating over long horizons
        v /= np.linalg.norm(v)
        if k % sample_every == 0:
            yield k * cfg.dt, PureStateVector(v, state.n_modes, state.fock_cutoff)


def reduce_to_qubits(state: PureStateVector) -> np.ndarray:
    m = state.matrix()
    rho = m.T @ m.conj()
    return 0.5 * (rho + rho.conj().T)


def effective_local_objective(state: PureStateVector, H: HamiltonianTerms) -> LocalObjective:
    """Reduce ``<(U x 1) psi| H |(U x 1) psi>`` to 4x4 objects.

    For any qubit gate ``U`` the energy equals
    ``tr(U rho U^+ H_S) + tr(U chi U^+ Sz) + e_const`` with
    ``chi = tr_E[|psi><psi| (1 x X)]``, ``X = sum_i lambda_i (b_i + b_i^+)``.
    ``chi2`` is the same with ``X^2`` and feeds the work variance.
    """
    m = state.matrix()
    xm = H.bath_quadrature @ m
    rho = m.T @ m.conj()
    chi = xm.T @ m.conj()
    chi2 = xm.T @ xm.conj()
    e_bath = float(np.sum(H.bath_energies[:, None] * np.abs(m) ** 2))
    herm = lambda a: 0.5 * (a + a.conj().T)
    return LocalObjective(rho=herm(rho), chi=herm(chi), chi2=herm(chi2), e_const=e_bath, h_system=H.h_system)


def observables(state: PureStateVector, H: HamiltonianTerms) -> dict[str, float]:
    """Per-sample quantities written to trajectory CSVs."""
    rho = reduce_to_qubits(state)
    return {
        "energy": H.expectation(state),
        "norm": float(np.linalg.norm(state.amplitudes)),
        "sz_total": float(np.real(np.trace(rho @ SZ_TOTAL))),
        "purity": float(np.real(np.trace(rho @ rho))),
    }


# -- binary snapshots ------------------------------------------------------
#
# little-endian layout:
#   magic  b"OBSV"  (4 bytes)
#   uint32 version (1), uint32 n_modes, uint32 fock_cutoff, uint64 length
#   length * (float64 re, float64 im)

_SV_MAGIC = b"OBSV"
_SV_HEADER = struct.Struct("<4sIIIQ")


def write_state(path, state: PureStateVector):
    path = Path(path)
    header = _SV_HEADER.pack(_SV_MAGIC, 1, state.n_modes, state.fock_cutoff, state.dim)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(state.amplitudes.astype("<c16").tobytes())
    tmp.replace(path)


def read_state(path) -> PureStateVector:
    data = Path(path).read_bytes()
    magic, version, nm, n, length = _SV_HEADER.unpack_from(data)
    if magic != _SV_MAGIC or version != 1:
        raise ValidationError(f"{path}: not a version-1 state snapshot")
    amps = np.frombuffer(data, dtype="<c16", count=length, offset=_SV_HEADER.size)
    return PureStateVector(amps.astype(complex), nm, n)
