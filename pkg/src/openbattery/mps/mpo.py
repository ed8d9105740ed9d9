"""MPO form of the compound Hamiltonian.

The star coupling ``(sz1 + sz2) * sum_i lambda_i x_i`` is carried by a
single accumulator channel: the qubits load ``sz1 + sz2`` into it and every
bath site may close it with ``lambda_i x_i``. Channels are

    0  nothing placed yet (identity)
    1  accumulated sz1 + sz2 (after qubit 1 only: sz1)
    2  complete term (identity)

so the bond dimension is 3 everywhere.
"""

from __future__ import annotations

import numpy as np

from ..exact import boson_ops
from ..model import ID2, SX, SZ, DiscretizedBath, ModelParams, effective_bias
from .contract import extend_right


class MatrixProductOperator:
    def __init__(self, tensors, params: ModelParams | None = None, bath: DiscretizedBath | None = None):
        self.tensors = [np.asarray(w, dtype=complex) for w in tensors]
        self.params = params
        self.bath = bath

    def __len__(self):
        return len(self.tensors)

    @property
    def bond_dims(self):
        return [self.tensors[0].shape[0]] + [w.shape[3] for w in self.tensors]

    def with_qubit_field(self, eps):
        """Copy with ``-eps * (sz1 + sz2)`` added."""
        ws = [w.copy() for w in self.tensors]
        ws[0][0, :, :, -1] += -eps * SZ
        last = ws[1].shape[3] - 1
        ws[1][0, :, :, last] += -eps * SZ
        return MatrixProductOperator(ws, self.params, self.bath)

    def to_dense(self):
        """Dense matrix in the exact engine's basis ordering (small chains only)."""
        w = self.tensors[0]
        out = w  # (1, s, s', v)
        for nxt in self.tensors[1:]:
            out = np.tensordot(out, nxt, axes=([-1], [0]))
        out = out[0, ..., 0]
        nsite = len(self.tensors)
        # axes: out_0, in_0, out_1, in_1, ...
        nm = nsite - 2
        site_order = list(range(nsite - 1, 1, -1)) + [0, 1]
        perm = [2 * k for k in site_order] + [2 * k + 1 for k in site_order]
        out = out.transpose(perm)
        dim = int(np.sqrt(out.size))
        return out.reshape(dim, dim)


def build_mpo(params: ModelParams, bath: DiscretizedBath, bias=False) -> MatrixProductOperator:
    """Hamiltonian MPO; ``bias=True`` adds the steering field ``-eps (sz1 + sz2)``."""
    d = params.delta
    n = params.fock_cutoff
    _, x = boson_ops(n)
    num = np.diag(np.arange(n, dtype=float))
    idn = np.eye(n)

    w1 = np.zeros((1, 2, 2, 3), dtype=complex)
    w1[0, :, :, 0] = ID2
    w1[0, :, :, 1] = SZ
    w1[0, :, :, 2] = -0.5 * d * SX

    w2 = np.zeros((3, 2, 2, 3), dtype=complex)
    w2[0, :, :, 0] = ID2
    w2[0, :, :, 1] = SZ
    w2[0, :, :, 2] = -0.5 * d * SX
    w2[1, :, :, 1] = ID2
    w2[1, :, :, 2] = 0.25 * params.j_coupling * SZ
    w2[2, :, :, 2] = ID2

    tensors = [w1, w2]
    nm = bath.n_modes
    for i in range(nm):
        w = np.zeros((3, n, n, 3), dtype=complex)
        w[0, :, :, 0] = idn
        w[0, :, :, 2] = bath.frequencies[i] * num
        w[1, :, :, 1] = idn
        w[1, :, :, 2] = bath.couplings[i] * x
        w[2, :, :, 2] = idn
        tensors.append(w)
    # close the chain on the "complete" channel
    tensors[-1] = tensors[-1][:, :, :, 2:3]
    mpo = MatrixProductOperator(tensors, params, bath)
    if bias:
        mpo = mpo.with_qubit_field(effective_bias(params))
    return mpo


def bath_sum_mpo(local_ops):
    """MPO of ``sum_i local_ops[i]`` over bath sites only (bond dimension 2)."""
    tensors = []
    for op in local_ops:
        n = op.shape[0]
        w = np.zeros((2, n, n, 2), dtype=complex)
        w[0, :, :, 0] = np.eye(n)
        w[0, :, :, 1] = op
        w[1, :, :, 1] = np.eye(n)
        tensors.append(w)
    return tensors


def mpo_product(upper, lower):
    """Site-wise product ``upper @ lower`` of two MPO tensor lists."""
    out = []
    for a, b in zip(upper, lower):
        t = np.tensordot(a, b, axes=([2], [1]))  # al s v bl s' u
        t = t.transpose(0, 3, 1, 4, 2, 5)
        al, bl, s, s2, v, u = t.shape
        out.append(t.reshape(al * bl, s, s2, v * u))
    return out


def bath_reduction(mps_tensors, mpo_tensors, start_channel=0, end_channel=-1):
    """Contract the bath part of ``<psi| O |psi>`` from the right.

    Returns ``M[bra, ket]`` on the bond entering the first bath site, with the
    MPO started in ``start_channel`` and terminated in ``end_channel``.
    """
    w_last = mpo_tensors[-1].shape[3]
    dr = mps_tensors[-1].shape[2]
    env = np.zeros((dr, w_last, dr), dtype=complex)
    env[:, end_channel % w_last, :] = np.eye(dr)
    for a, w in zip(reversed(mps_tensors), reversed(mpo_tensors)):
        env = extend_right(env, a, w)
    return env[:, start_channel, :]
