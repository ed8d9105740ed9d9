"""Time-dependent variational principle on the MPS manifold.

Each step is a symmetric (second-order) sweep: left-to-right with half the
step, then right-to-left with the other half. Single-site steps keep bond
dimensions fixed; two-site steps let them grow and are used as a catch-up
whenever the previous two-site step still grew some bond, and otherwise
every ``catchup_every`` steps. Once every bond sits at its cap (the bond
limit or the Hilbert-space dimension on the shorter side) the catch-up can
no longer grow anything and is skipped.
"""

from __future__ import annotations

import logging
import math
from typing import Iterator

import numpy as np

from ..krylov import expm_krylov
from .contract import boundary, extend_left, extend_right, one_site_operator, two_site_operator, zero_site_operator
from .dmrg import TruncationPolicy
from .mpo import MatrixProductOperator
from .state import MatrixProductState, truncated_svd

log = logging.getLogger(__name__)


class TDVPEngine:
    def __init__(self, mps: MatrixProductState, mpo: MatrixProductOperator, policy: TruncationPolicy | None = None,
                 krylov_dim: int = 20, krylov_tol: float = 1e-12, catchup_every: int = 10):
        self.policy = policy or TruncationPolicy()
        self.ws = mpo.tensors
        self.psi = mps.copy().canonicalize(0)
        self.psi.normalize()
        self.krylov_dim = krylov_dim
        self.krylov_tol = krylov_tol
        self.catchup_every = catchup_every
        self.warnings: list[str] = []
        self.max_discarded = 0.0
        self._grow = True
        self._since_catchup = 0
        n = len(self.ws)
        self.left = [None] * n
        self.right = [None] * n
        self.left[0] = boundary()
        self.right[n - 1] = boundary()
        for k in range(n - 1, 0, -1):
            self.right[k - 1] = extend_right(self.right[k], self.psi.tensors[k], self.ws[k])

    def _expm(self, matvec, x, dt):
        shape = x.shape
        out = expm_krylov(lambda v: matvec(v.reshape(shape)).ravel(), x.ravel(), dt,
                          self.krylov_dim, self.krylov_tol)
        return out.reshape(shape)

    def step(self, dt):
        before = self.psi.bond_dims
        two_site = self._grow or self._since_catchup + 1 >= self.catchup_every
        if two_site and self._saturated():
            two_site = self._grow = False
        if two_site:
            disc = self._two_site_step(dt)
            self._since_catchup = 0
            after = self.psi.bond_dims
            self._grow = any(b > a for a, b in zip(before, after))
            if disc > self.policy.discarded_weight and max(after) >= self.policy.max_bond:
                self.warnings.append(
                    f"bond dimension saturated at {self.policy.max_bond} with discarded weight {disc:.2e}"
                )
        else:
            self._one_site_step(dt)
            self._since_catchup += 1

    def _saturated(self):
        dims = [int(d) for d in self.psi.local_dims]
        cap = self.policy.max_bond
        for k, b in enumerate(self.psi.bond_dims):
            left, right = math.prod(dims[:k]), math.prod(dims[k:])
            if b < min(cap, left, right):
                return False
        return True

    # -- single site -----------------------------------------------------------

    def _one_site_step(self, dt):
        psi, ws, L, R = self.psi, self.ws, self.left, self.right
        n = len(ws)
        h = 0.5 * dt
        for k in range(n):
            a = self._expm(one_site_operator(L[k], ws[k], R[k]), psi.tensors[k], h)
            if k == n - 1:
                psi.tensors[k] = a
                break
            dl, d, dr = a.shape
            q, r = np.linalg.qr(a.reshape(dl * d, dr))
            psi.tensors[k] = q.reshape(dl, d, -1)
            L[k + 1] = extend_left(L[k], psi.tensors[k], ws[k])
            r = self._expm(zero_site_operator(L[k + 1], R[k]), r, -h)
            psi.tensors[k + 1] = np.tensordot(r, psi.tensors[k + 1], axes=([1], [0]))
        # the last site gets its second half-step at the start of this pass
        for k in range(n - 1, -1, -1):
            a = self._expm(one_site_operator(L[k], ws[k], R[k]), psi.tensors[k], h)
            if k == 0:
                psi.tensors[0] = a
                break
            dl, d, dr = a.shape
            q, r = np.linalg.qr(a.reshape(dl, d * dr).T)
            psi.tensors[k] = q.T.reshape(-1, d, dr)
            R[k - 1] = extend_right(R[k], psi.tensors[k], ws[k])
            r = r.T
            r = self._expm(zero_site_operator(L[k], R[k - 1]), r, -h)
            psi.tensors[k - 1] = np.tensordot(psi.tensors[k - 1], r, axes=([2], [0]))
        psi.center = 0

    # -- two site --------------------------------------------------------------

    def _two_site_step(self, dt):
        psi, ws, L, R, pol = self.psi, self.ws, self.left, self.right, self.policy
        n = len(ws)
        h = 0.5 * dt
        # the threshold is a budget for the whole step, shared by 2(n-1) truncations
        cut = pol.discarded_weight / (2 * (n - 1))
        worst = 0.0
        for k in range(n - 1):
            theta = np.tensordot(psi.tensors[k], psi.tensors[k + 1], axes=([2], [0]))
            theta = self._expm(two_site_operator(L[k], ws[k], ws[k + 1], R[k + 1]), theta, h)
            dl, d1, d2, dr = theta.shape
            # bonds only grow here; shrinking would throw away weight for nothing
            u, s, vh, disc = truncated_svd(theta.reshape(dl * d1, d2 * dr), pol.max_bond, cut,
                                           min_keep=psi.tensors[k].shape[2])
            worst += disc
            psi.tensors[k] = u.reshape(dl, d1, -1)
            b = (s[:, None] * vh).reshape(-1, d2, dr)
            L[k + 1] = extend_left(L[k], psi.tensors[k], ws[k])
            if k < n - 2:
                b = self._expm(one_site_operator(L[k + 1], ws[k + 1], R[k + 1]), b, -h)
            psi.tensors[k + 1] = b
        for k in range(n - 2, -1, -1):
            if k < n - 2:
                b = psi.tensors[k + 1]
                b = self._expm(one_site_operator(L[k + 1], ws[k + 1], R[k + 1]), b, -h)
                psi.tensors[k + 1] = b
            theta = np.tensordot(psi.tensors[k], psi.tensors[k + 1], axes=([2], [0]))
            theta = self._expm(two_site_operator(L[k], ws[k], ws[k + 1], R[k + 1]), theta, h)
            dl, d1, d2, dr = theta.shape
            u, s, vh, disc = truncated_svd(theta.reshape(dl * d1, d2 * dr), pol.max_bond, cut,
                                           min_keep=psi.tensors[k].shape[2])
            worst += disc
            psi.tensors[k + 1] = vh.reshape(-1, d2, dr)
            psi.tensors[k] = (u * s).reshape(dl, d1, -1)
            R[k] = extend_right(R[k + 1], psi.tensors[k + 1], ws[k + 1])
        # put back the weight lost to truncation
        psi.tensors[0] = psi.tensors[0] / np.linalg.norm(psi.tensors[0])
        psi.center = 0
        self.max_discarded = max(self.max_discarded, worst)  # per step
        return worst


def tdvp_evolve(mps: MatrixProductState, mpo: MatrixProductOperator, dt: float = 0.02, horizon: float = 20.0,
                policy: TruncationPolicy | None = None, sample_every: int = 1, warnings: list | None = None,
                **engine_kw) -> Iterator[tuple[float, MatrixProductState]]:
    """Yield ``(t, psi(t))`` at ``t = 0, dt, ...`` up to ``horizon``.

    Truncation warnings are appended to ``warnings`` when given.
    """
    engine = TDVPEngine(mps, mpo, policy, **engine_kw)
    n_steps = int(round(horizon / dt))
    yield 0.0, engine.psi.copy()
    for k in range(1, n_steps + 1):
        engine.step(dt)
        if warnings is not None and engine.warnings:
            warnings.extend(f"t={k * dt:.4f}: {w}" for w in engine.warnings)
            engine.warnings.clear()
        if k % sample_every == 0:
            yield k * dt, engine.psi.copy()
