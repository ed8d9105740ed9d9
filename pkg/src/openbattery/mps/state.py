"""Matrix product states for the qubits-plus-bath chain.

Site order is qubit 1, qubit 2, mode 1, ..., mode N (local dimensions
2, 2, n, ..., n). Qubit local index 0 is "up".
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..ergotropy import check_unitary
from ..errors import CapacityError, ValidationError
from ..exact import PureStateVector

MAX_DENSE_DIMENSION = 10**7


def truncated_svd(mat, max_bond=None, cutoff=0.0, min_keep=1):
    """SVD keeping the fewest singular values whose discarded weight
    (relative squared norm) is at most ``cutoff``, capped at ``max_bond``.
    At least ``min_keep`` values are kept (if available and under the cap).

    Returns ``u, s, vh, discarded``.
    """
    try:
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        import scipy.linalg

        u, s, vh = scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")
    total = float(np.sum(s**2))
    if total == 0.0:
        return u[:, :1], s[:1], vh[:1], 0.0
    # tail[k] = weight discarded when keeping k values
    tail = np.concatenate([np.cumsum((s**2)[::-1])[::-1], [0.0]]) / total
    keep = int(np.argmax(tail <= cutoff))
    keep = min(max(keep, min_keep, 1), len(s))
    if max_bond is not None:
        keep = min(keep, max_bond)
    return u[:, :keep], s[:keep], vh[:keep], float(tail[keep])


class MatrixProductState:
    def __init__(self, tensors, center=None):
        self.tensors = [np.asarray(t, dtype=complex) for t in tensors]
        for k, t in enumerate(self.tensors):
            if t.ndim != 3:
                raise ValidationError(f"site {k}: tensor must have 3 legs, got {t.ndim}")
            if k and self.tensors[k - 1].shape[2] != t.shape[0]:
                raise ValidationError(f"bond mismatch between sites {k - 1} and {k}")
        self.center = center

    # -- structure ---------------------------------------------------------

    def __len__(self):
        return len(self.tensors)

    @property
    def local_dims(self):
        return [t.shape[1] for t in self.tensors]

    @property
    def bond_dims(self):
        return [self.tensors[0].shape[0]] + [t.shape[2] for t in self.tensors]

    @property
    def n_modes(self):
        return len(self.tensors) - 2

    def copy(self):
        return MatrixProductState([t.copy() for t in self.tensors], self.center)

    # -- gauge -------------------------------------------------------------

    def canonicalize(self, center=0):
        """Bring the state to mixed-canonical form around ``center`` (in place)."""
        if self.center is None:
            self._sweep_left_to(len(self) - 1, 0)
            self._sweep_right_to(0, len(self) - 1)
            self.center = 0
        if center > self.center:
            self._sweep_left_to(center, self.center)
        elif center < self.center:
            self._sweep_right_to(center, self.center)
        self.center = center
        return self

    def _sweep_left_to(self, target, start):
        for k in range(start, target):
            a = self.tensors[k]
            dl, d, dr = a.shape
            q, r = np.linalg.qr(a.reshape(dl * d, dr))
            self.tensors[k] = q.reshape(dl, d, -1)
            self.tensors[k + 1] = np.tensordot(r, self.tensors[k + 1], axes=([1], [0]))

    def _sweep_right_to(self, target, start):
        for k in range(start, target, -1):
            a = self.tensors[k]
            dl, d, dr = a.shape
            q, r = np.linalg.qr(a.reshape(dl, d * dr).T)
            self.tensors[k] = q.T.reshape(-1, d, dr)
            self.tensors[k - 1] = np.tensordot(self.tensors[k - 1], r.T, axes=([2], [0]))

    def norm(self):
        if self.center is not None:
            return float(np.linalg.norm(self.tensors[self.center]))
        env = np.ones((1, 1), dtype=complex)
        for a in self.tensors:
            env = np.tensordot(env, a, axes=([1], [0]))
            env = np.tensordot(a.conj(), env, axes=([0, 1], [0, 1]))
        return float(np.sqrt(abs(env[0, 0])))

    def normalize(self):
        self.canonicalize(self.center or 0)
        self.tensors[self.center] /= np.linalg.norm(self.tensors[self.center])
        return self

    def canonical_error(self):
        """Largest deviation from the isometry conditions around the centre."""
        err = 0.0
        for k, a in enumerate(self.tensors):
            dl, d, dr = a.shape
            if k < self.center:
                m = a.reshape(dl * d, dr)
                err = max(err, np.abs(m.conj().T @ m - np.eye(dr)).max())
            elif k > self.center:
                m = a.reshape(dl, d * dr)
                err = max(err, np.abs(m @ m.conj().T - np.eye(dl)).max())
        return err

    # -- conversions ---------------------------------------------------------

    @classmethod
    def product(cls, site_vectors):
        tensors = [np.asarray(v, dtype=complex).reshape(1, -1, 1) for v in site_vectors]
        mps = cls(tensors)
        return mps.canonicalize(0).normalize()

    @classmethod
    def random(cls, local_dims, bond=4, seed=0):
        rng = np.random.default_rng(seed)
        dims = [1]
        n = len(local_dims)
        for k in range(1, n):
            left = int(np.prod(local_dims[:k]))
            right = int(np.prod(local_dims[k:]))
            dims.append(min(bond, left, right))
        dims.append(1)
        tensors = [
            rng.standard_normal((dims[k], d, dims[k + 1])) + 1j * rng.standard_normal((dims[k], d, dims[k + 1]))
            for k, d in enumerate(local_dims)
        ]
        return cls(tensors).canonicalize(0).normalize()

    def to_tensor(self):
        dim = int(np.prod(self.local_dims))
        if dim > MAX_DENSE_DIMENSION:
            raise CapacityError(f"dense dimension {dim} exceeds {MAX_DENSE_DIMENSION}")
        out = self.tensors[0]
        for a in self.tensors[1:]:
            out = np.tensordot(out, a, axes=([-1], [0]))
        return out[0, ..., 0]

    @classmethod
    def from_tensor(cls, psi, max_bond=None, cutoff=1e-14):
        dims = psi.shape
        tensors = []
        rest = psi.reshape(1, -1)
        left = 1
        for d in dims[:-1]:
            m = rest.reshape(left * d, -1)
            u, s, vh, _ = truncated_svd(m, max_bond, cutoff)
            tensors.append(u.reshape(left, d, -1))
            rest = s[:, None] * vh
            left = u.shape[1]
        tensors.append(rest.reshape(left, dims[-1], 1))
        return cls(tensors, center=len(dims) - 1)

    # -- gates -------------------------------------------------------------

    def apply_local_gate(self, u):
        """``(u (x) 1_E)|psi>`` for a 4x4 gate on the two qubit sites.

        Exact: the left bond of qubit 1 is trivial, so the new qubit bond
        never needs more than two singular values.
        """
        u = check_unitary(u, 1e-12)
        out = self.copy().canonicalize(0)
        a0, a1 = out.tensors[0], out.tensors[1]
        theta = np.tensordot(a0, a1, axes=([2], [0]))                 # 1 s1 s2 b
        gate = u.reshape(2, 2, 2, 2)
        theta = np.tensordot(gate, theta, axes=([2, 3], [1, 2]))      # s1 s2 1 b
        theta = theta.transpose(2, 0, 1, 3)
        dr = theta.shape[3]
        uu, s, vh = np.linalg.svd(theta.reshape(2, 2 * dr), full_matrices=False)
        out.tensors[0] = uu.reshape(1, 2, -1)
        out.tensors[1] = (s[:, None] * vh).reshape(-1, 2, dr)
        out.center = 1
        return out


def apply_local_gate(mps: MatrixProductState, u) -> MatrixProductState:
    return mps.apply_local_gate(u)


def mps_to_dense(mps: MatrixProductState) -> PureStateVector:
    """Amplitudes in the exact engine's ordering (qubits fastest, mode 1 next)."""
    t = mps.to_tensor()
    nm = mps.n_modes
    n = mps.local_dims[2] if nm else 1
    # tensor axes are (q1, q2, m1..mN); dense wants (mN..m1, q1, q2)
    perm = list(range(nm + 1, 1, -1)) + [0, 1]
    amps = t.transpose(perm).reshape(-1)
    return PureStateVector(amps / np.linalg.norm(amps), nm, n)


def dense_to_mps(state: PureStateVector, max_bond=None, cutoff=1e-14) -> MatrixProductState:
    nm, n = state.n_modes, state.fock_cutoff
    t = state.amplitudes.reshape((n,) * nm + (2, 2))
    perm = [nm, nm + 1] + list(range(nm - 1, -1, -1))
    mps = MatrixProductState.from_tensor(t.transpose(perm), max_bond, cutoff)
    return mps.canonicalize(0)


def fidelity(a: MatrixProductState, b: MatrixProductState) -> float:
    """``|<a|b>|`` for states on the same chain."""
    return abs(overlap(a, b))


def overlap(a: MatrixProductState, b: MatrixProductState) -> complex:
    env = np.ones((1, 1), dtype=complex)
    for x, y in zip(a.tensors, b.tensors):
        env = np.tensordot(env, y, axes=([1], [0]))
        env = np.tensordot(x.conj(), env, axes=([0, 1], [0, 1]))
    return complex(env[0, 0])


# -- binary snapshots ------------------------------------------------------
#
# little-endian layout:
#   magic b"OBMP", uint32 version (1), uint32 n_sites, int32 center (-1 if none)
#   uint32 local_dims[n_sites], uint32 bond_dims[n_sites + 1]
#   for each site: complex128 tensor [left, phys, right], row-major

_MP_MAGIC = b"OBMP"
_MP_HEADER = struct.Struct("<4sIIi")


def write_mps(path, mps: MatrixProductState):
    path = Path(path)
    n = len(mps)
    parts = [
        _MP_HEADER.pack(_MP_MAGIC, 1, n, -1 if mps.center is None else mps.center),
        np.asarray(mps.local_dims, dtype="<u4").tobytes(),
        np.asarray(mps.bond_dims, dtype="<u4").tobytes(),
    ]
    parts += [np.ascontiguousarray(t).astype("<c16").tobytes() for t in mps.tensors]
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(b"".join(parts))
    tmp.replace(path)


def read_mps(path) -> MatrixProductState:
    data = Path(path).read_bytes()
    magic, version, n, center = _MP_HEADER.unpack_from(data)
    if magic != _MP_MAGIC or version != 1:
        raise ValidationError(f"{path}: not a version-1 MPS snapshot")
    off = _MP_HEADER.size
    local = np.frombuffer(data, "<u4", n, off).astype(int)
    off += 4 * n
    bonds = np.frombuffer(data, "<u4", n + 1, off).astype(int)
    off += 4 * (n + 1)
    tensors = []
    for k in range(n):
        shape = (bonds[k], local[k], bonds[k + 1])
        size = int(np.prod(shape))
        tensors.append(np.frombuffer(data, "<c16", size, off).reshape(shape).astype(complex))
        off += 16 * size
    return MatrixProductState(tensors, None if center < 0 else center)
