"""Two-qubit gates as CNOT + single-qubit-rotation circuits.

Decomposition goes through the magic basis. For ``U`` in SU(4),
``U_B = M^+ U M`` factors as ``K1 D K2`` with ``K1, K2`` real orthogonal
(local gates back in the computational basis) and ``D`` diagonal (the
nonlocal part ``exp(i(c1 XX + c2 YY + c3 ZZ))``). Two gates are locally
equivalent exactly when ``m = U_B^T U_B`` has the same spectrum, which also
gives the local layers that turn one into the other: that is how a gate is
mapped onto a fixed 0-, 1- or 3-CNOT template.

Qubit 0 is the first (most significant) qubit of the (uu, ud, du, dd) basis.
Elements are applied in list order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError
from .ergotropy import check_unitary
from .model import ID2, SX, SY, SZ

MAGIC = np.array([[1, 0, 0, 1j], [0, 1j, 1, 0], [0, 1j, -1, 0], [1, 0, 0, -1j]], dtype=complex) / np.sqrt(2)
RECON_TOL = 1e-10
_P0 = np.diag([1.0, 0.0]).astype(complex)
_P1 = np.diag([0.0, 1.0]).astype(complex)
# real weights for splitting the commuting pair (Re m, Im m); tried in order
_SPLIT_WEIGHTS = (0.6180339887, 1.4142135623, 0.3183098862, 2.7182818284)


@dataclass(frozen=True)
class Rotation:
    """``U3(theta, phi, lam)`` on ``target``."""

    target: int
    theta: float
    phi: float
    lam: float

    def matrix(self):
        c, s = math.cos(self.theta / 2), math.sin(self.theta / 2)
        return np.array([[c, -np.exp(1j * self.lam) * s],
                         [np.exp(1j * self.phi) * s, np.exp(1j * (self.phi + self.lam)) * c]], dtype=complex)


@dataclass(frozen=True)
class CX:
    control: int
    target: int

    def matrix(self):
        if (self.control, self.target) == (0, 1):
            return np.kron(_P0, ID2) + np.kron(_P1, SX)
        if (self.control, self.target) == (1, 0):
            return np.kron(ID2, _P0) + np.kron(SX, _P1)
        raise ValueError(f"invalid CX({self.control}, {self.target})")


@dataclass
class GateSequence:
    elements: list = field(default_factory=list)

    @property
    def cx_count(self):
        return sum(isinstance(e, CX) for e in self.elements)

    def to_unitary(self):
        u = np.eye(4, dtype=complex)
        for e in self.elements:
            if isinstance(e, Rotation):
                r = e.matrix()
                u = (np.kron(r, ID2) if e.target == 0 else np.kron(ID2, r)) @ u
            else:
                u = e.matrix() @ u
        return u

    def to_rows(self):
        """``(kind, a, b, theta, phi, lam)`` rows for CSV export."""
        rows = []
        for e in self.elements:
            if isinstance(e, Rotation):
                rows.append(("u3", e.target, -1, e.theta, e.phi, e.lam))
            else:
                rows.append(("cx", e.control, e.target, 0.0, 0.0, 0.0))
        return rows


def reconstruct(seq: GateSequence) -> np.ndarray:
    return seq.to_unitary()


def phase_distance(u, v) -> float:
    """``min_phi ||u - e^{i phi} v||_max`` for unitaries of equal size."""
    ov = np.vdot(v, u)
    ph = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.abs(u - ph * v).max())


# -- single-qubit pieces -------------------------------------------------------


def u3_angles(v):
    """``(theta, phi, lam)`` with ``v = e^{i delta} U3(theta, phi, lam)``."""
    v = np.asarray(v, dtype=complex)
    v = v / np.sqrt(abs(np.linalg.det(v)))
    theta = 2 * math.atan2(abs(v[1, 0]), abs(v[0, 0]))
    if abs(v[0, 0]) > 1e-12:
        delta = np.angle(v[0, 0])
        if abs(v[1, 0]) > 1e-12:
            phi = np.angle(v[1, 0]) - delta
            lam = np.angle(-v[0, 1]) - delta
        else:
            phi, lam = 0.0, np.angle(v[1, 1]) - delta
    else:
        delta = np.angle(v[1, 0])
        phi, lam = 0.0, np.angle(-v[0, 1]) - delta
    wrap = lambda a: float((a + np.pi) % (2 * np.pi) - np.pi)
    return float(theta), wrap(phi), wrap(lam)


def _is_identity(v, tol=1e-12):
    return phase_distance(v, np.eye(2)) < tol


def factor_local(a):
    """Split a local 4x4 gate into ``(x, y)`` with ``a = x (x) y`` (up to phase)."""
    r = np.asarray(a).reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(r)
    x = np.sqrt(s[0]) * u[:, 0].reshape(2, 2)
    y = np.sqrt(s[0]) * vh[0].reshape(2, 2)
    return x / np.sqrt(abs(np.linalg.det(x))), y / np.sqrt(abs(np.linalg.det(y)))


def _rz(t):
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


def _ry(t):
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


# -- magic-basis machinery -----------------------------------------------------


def _special(u):
    return u / np.linalg.det(u) ** 0.25


def _split(u_b, weight):
    """``u_b = K1 D K2`` with K1, K2 in SO(4) and D diagonal, det D = 1."""
    m = u_b.T @ u_b
    _, p = np.linalg.eigh(m.real + weight * m.imag)
    if np.linalg.det(p) < 0:
        p[:, 0] = -p[:, 0]
    d2 = np.diag(p.T @ m @ p)
    if np.abs(p.T @ m @ p - np.diag(d2)).max() > 1e-9:
        return None
    d = np.exp(0.5j * np.angle(d2))
    if np.real(np.prod(d)) < 0:
        d[0] = -d[0]
    k1 = u_b @ p @ np.diag(d.conj())
    if np.abs(k1.imag).max() > 1e-8:
        return None
    return k1.real, d, p.T


def kak_coefficients(u):
    """``(c1, c2, c3)`` with ``u ~ exp(i(c1 XX + c2 YY + c3 ZZ))`` up to local gates."""
    u_b = MAGIC.conj().T @ _special(check_unitary(u, 1e-10)) @ MAGIC
    for w in _SPLIT_WEIGHTS:
        out = _split(u_b, w)
        if out is not None:
            break
    else:
        raise ConsistencyError("could not diagonalise the magic-basis gram matrix")
    theta = np.angle(out[1])
    # diagonal of each Pauli pair in the magic basis
    cols = [np.ones(4)] + [np.real(np.diag(MAGIC.conj().T @ np.kron(p, p) @ MAGIC)) for p in (SX, SY, SZ)]
    coef = np.linalg.lstsq(np.array(cols).T, theta, rcond=None)[0]
    return tuple(float(c) for c in coef[1:])


def local_equivalence(u, v, weight=_SPLIT_WEIGHTS[0]):
    """Local layers ``(A, B)`` with ``u = e^{i g} A v B``, or None if not equivalent."""
    v_b = MAGIC.conj().T @ _special(v) @ MAGIC
    sv = _split(v_b, weight)
    if sv is None:
        return None
    l1, dv, l2 = sv
    for k in range(4):  # the four branches of det(u)^(1/4)
        u_b = MAGIC.conj().T @ (_special(u) * 1j**k) @ MAGIC
        su = _split(u_b, weight)
        if su is None:
            continue
        k1, du, k2 = su
        perm = _match(du**2, dv**2)
        if perm is None:
            continue
        # reorder u's eigenbasis to line up with v's
        pm = np.eye(4)[:, perm]
        du = du[perm]
        k1 = k1 @ pm
        k2 = pm.T @ k2
        s = np.real(du / dv)
        if np.abs(np.abs(s) - 1).max() > 1e-8 or np.abs(du / dv - s).max() > 1e-8:
            continue
        if np.prod(np.sign(s)) < 0:
            continue
        if np.linalg.det(pm) < 0:
            # keep k1, k2 special orthogonal
            k1[:, 0] = -k1[:, 0]
            k2[0] = -k2[0]
        a = MAGIC @ (k1 @ np.diag(np.sign(s)) @ l1.T) @ MAGIC.conj().T
        b = MAGIC @ (l2.T @ k2) @ MAGIC.conj().T
        if phase_distance(u, a @ v @ b) < 1e-9:
            return a, b
    return None


def _match(x, y, tol=1e-7):
    """Permutation ``p`` with ``x[p] ~ y``."""
    left = list(range(len(x)))
    perm = []
    for target in y:
        k = min(left, key=lambda i: abs(x[i] - target))
        if abs(x[k] - target) > tol:
            return None
        perm.append(k)
        left.remove(k)
    return perm


def _core_three_cx(c1, c2, c3):
    """Three-CNOT template locally equivalent to ``exp(i(c1 XX + c2 YY + c3 ZZ))``."""
    return [
        ("1q", 1, _rz(np.pi / 2)),
        ("cx", 1, 0),
        ("1q", 0, _rz(2 * c3 + np.pi / 2)),
        ("1q", 1, _ry(np.pi / 2 - 2 * c1)),
        ("cx", 0, 1),
        ("1q", 1, _ry(np.pi / 2 - 2 * c2)),
        ("cx", 1, 0),
    ]


def _ops_unitary(ops):
    u = np.eye(4, dtype=complex)
    for op in ops:
        if op[0] == "1q":
            _, q, r = op
            u = (np.kron(r, ID2) if q == 0 else np.kron(ID2, r)) @ u
        else:
            u = CX(op[1], op[2]).matrix() @ u
    return u


def _to_sequence(ops):
    """Merge runs of single-qubit gates and convert them to U3 rotations."""
    pending = [np.eye(2, dtype=complex), np.eye(2, dtype=complex)]
    elems = []

    def flush():
        for q in (0, 1):
            if not _is_identity(pending[q]):
                elems.append(Rotation(q, *u3_angles(pending[q])))
            pending[q] = np.eye(2, dtype=complex)

    for op in ops:
        if op[0] == "1q":
            pending[op[1]] = op[2] @ pending[op[1]]
        else:
            flush()
            elems.append(CX(op[1], op[2]))
    flush()
    return GateSequence(elems)


def _wrap_locals(a, b, core_ops):
    a0, a1 = factor_local(a)
    b0, b1 = factor_local(b)
    return [("1q", 0, b0), ("1q", 1, b1)] + core_ops + [("1q", 0, a0), ("1q", 1, a1)]


def _decompose(u):
    # fixed points first
    for cx in (CX(0, 1), CX(1, 0)):
        if phase_distance(u, cx.matrix()) < 1e-12:
            return [("cx", cx.control, cx.target)]
    u_b = MAGIC.conj().T @ _special(u) @ MAGIC
    m = u_b.T @ u_b
    # local gates have m = +-1; SWAP-like gates have m = +-i
    if np.abs(m - m[0, 0] * np.eye(4)).max() < 1e-10 and abs(m[0, 0] ** 2 - 1) < 1e-10:
        return _wrap_locals(u, np.eye(4), [])
    cx_ops = [("cx", 0, 1)]
    for w in _SPLIT_WEIGHTS:
        eq = local_equivalence(u, _ops_unitary(cx_ops), w)
        if eq is not None:
            return _wrap_locals(*eq, cx_ops)
    core = _core_three_cx(*kak_coefficients(u))
    for w in _SPLIT_WEIGHTS:
        eq = local_equivalence(u, _ops_unitary(core), w)
        if eq is not None:
            return _wrap_locals(*eq, core)
    return None


def circuit_export(u, seed: int = 0) -> GateSequence:
    """CNOT + U3 circuit reproducing ``u`` up to a global phase.

    Uses 0, 1 or 3 CNOTs. When the magic-basis split is numerically
    degenerate the gate is first multiplied by a seeded random local layer,
    which shows up as one extra rotation layer at the start of the circuit.
    """
    u = check_unitary(u, 1e-10)
    ops = _decompose(u)
    rng = np.random.default_rng(seed)
    tries = 0
    while (ops is None or phase_distance(_ops_unitary(ops), u) > RECON_TOL) and tries < 8:
        tries += 1
        layer = [_random_su2(rng), _random_su2(rng)]
        inner = _decompose(u @ np.kron(layer[0], layer[1]).conj().T)
        if inner is not None:
            ops = [("1q", 0, layer[0]), ("1q", 1, layer[1])] + inner
    if ops is None:
        raise ConsistencyError("two-qubit decomposition failed")
    seq = _to_sequence(ops)
    err = phase_distance(seq.to_unitary(), u)
    if err > RECON_TOL:
        raise ConsistencyError(f"circuit reconstruction error {err:.2e} exceeds {RECON_TOL}")
    return seq


def _random_su2(rng):
    z = rng.standard_normal(4)
    z /= np.linalg.norm(z)
    a, b = z[0] + 1j * z[1], z[2] + 1j * z[3]
    return np.array([[a, -b.conjugate()], [b, a.conjugate()]])
