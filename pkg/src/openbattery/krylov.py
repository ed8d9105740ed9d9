"""Lanczos-based propagator ``exp(-i H dt) v`` for Hermitian ``H`` given as a matvec.

Used by the exact engine for whole-state steps and by TDVP for the local
site and bond problems.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import StepSizeError


def lanczos_basis(matvec, v, m, done=None):
    """Orthonormal Krylov basis of ``span{v, Hv, ..., H^(m-1) v}``.

    Returns ``(Q, alpha, beta, beta_last)`` with ``Q`` of shape (k, len(v)),
    the tridiagonal coefficients and the residual coupling out of the
    subspace. Full reorthogonalisation; ``k < m`` on invariant subspace, or
    once ``done(alpha, beta, beta_last)`` returns True.
    """
    n = v.size
    m = min(m, n)
    q = np.empty((m, n), dtype=complex)
    alpha = np.empty(m)
    beta = np.empty(m)
    q[0] = v / np.linalg.norm(v)
    k = m
    beta_last = 0.0
    for j in range(m):
        w = matvec(q[j])
        alpha[j] = np.vdot(q[j], w).real
        w = w - alpha[j] * q[j]
        if j > 0:
            w -= beta[j - 1] * q[j - 1]
        # two passes of Gram-Schmidt keep Q orthonormal to machine precision
        for _ in range(2):
            w -= q[: j + 1].T @ (w.conj() @ q[: j + 1].T).conj()
        b = np.linalg.norm(w)
        if j == m - 1 or (done is not None and j >= 2 and done(alpha[: j + 1], beta[:j], b)):
            k = j + 1
            beta_last = b
            break
        if b < 1e-13 * max(1.0, abs(alpha[j])):
            k = j + 1
            beta_last = 0.0
            break
        beta[j] = b
        q[j + 1] = w / b
    return q[:k], alpha[:k], beta[: k - 1], beta_last


def _small_expm(a, b, dt):
    if len(a) == 1:
        return np.exp(-1j * dt * a)
    evals, evecs = eigh_tridiagonal(a, b)
    return evecs @ (np.exp(-1j * dt * evals) * evecs[0].conj())


def _expm_once(matvec, v, dt, m, tol=0.0):
    nrm = np.linalg.norm(v)
    if nrm == 0:
        return np.zeros_like(v), 0.0

    # a-posteriori error: coupling out of the Krylov space times the weight
    # left on the last basis vector
    def done(a, b, b_last):
        return nrm * b_last * abs(_small_expm(a, b, dt)[-1]) <= 0.1 * tol

    q, a, b, b_last = lanczos_basis(matvec, v, m, done if tol > 0 else None)
    coeffs = _small_expm(a, b, dt)
    out = nrm * (coeffs @ q)
    err = nrm * b_last * abs(coeffs[-1])
    return out, err


def expm_krylov(matvec, v, dt, m=30, tol=1e-10, max_restarts=8):
    """Apply ``exp(-i H dt)`` to ``v``.

    The Krylov space stops growing once the residual estimate is well below
    ``tol``. If it still exceeds ``tol`` at ``m`` vectors the step is split in halves and
    retried, up to ``max_restarts`` levels of splitting. Raises
    :class:`StepSizeError` when that is not enough.
    """
    v = np.asarray(v, dtype=complex)
    out, err = _expm_once(matvec, v, dt, m, tol)
    if err <= tol:
        return out
    if max_restarts <= 0:
        raise StepSizeError(
            f"Krylov residual {err:.3e} exceeds tolerance {tol:.1e}; reduce dt", residual=err
        )
    half = expm_krylov(matvec, v, 0.5 * dt, m, 0.5 * tol, max_restarts - 1)
    return expm_krylov(matvec, half, 0.5 * dt, m, 0.5 * tol, max_restarts - 1)
