"""Environment updates and effective-Hamiltonian products.

Index conventions:
    site tensor       A[left, phys, right]
    MPO tensor        W[left, out, in, right]
    left environment  L[bra, mpo, ket]
    right environment R[bra, mpo, ket]
"""

import numpy as np


def extend_left(L, A, W):
    t = np.tensordot(L, A, axes=([2], [0]))            # a w s' b'
    t = np.tensordot(t, W, axes=([1, 2], [0, 2]))      # a b' s v
    t = np.tensordot(A.conj(), t, axes=([0, 1], [0, 2]))  # b b' v
    return t.transpose(0, 2, 1)


def extend_right(R, A, W):
    t = np.tensordot(A, R, axes=([2], [2]))            # a' s' b v
    t = np.tensordot(t, W, axes=([1, 3], [2, 3]))      # a' b w s
    t = np.tensordot(A.conj(), t, axes=([1, 2], [3, 1]))  # a a' w
    return t.transpose(0, 2, 1)


# The operator builders contract environment and MPO once and return a
# matvec made of two plain matrix products; Krylov solvers call it many
# times per local update.


def _left_block(L, W):
    a, _, a2 = L.shape
    s, s2, v = W.shape[1], W.shape[2], W.shape[3]
    lw = np.tensordot(L, W, axes=([1], [0]))           # a a' s s' v
    return lw.transpose(0, 2, 4, 1, 3).reshape(a * s * v, a2 * s2), (a, s, v)


def one_site_operator(L, W, R):
    m1, (a, s, v) = _left_block(L, W)
    b = R.shape[0]
    rm = R.transpose(1, 2, 0).reshape(-1, b)           # (v b') x b

    def mv(theta):
        x = m1 @ theta.reshape(m1.shape[1], -1)        # (a s v) x b'
        return (x.reshape(a * s, -1) @ rm).reshape(a, s, b)
    return mv


def two_site_operator(L, W1, W2, R):
    m1, (a, s1, v) = _left_block(L, W1)
    b, s2 = R.shape[0], W2.shape[1]
    wr = np.tensordot(W2, R, axes=([3], [1]))          # v s2 s2' b b'
    wr = wr.transpose(0, 2, 4, 1, 3).reshape(-1, s2 * b)

    def mv(theta):
        x = m1 @ theta.reshape(m1.shape[1], -1)        # (a s1 v) x (s2' b')
        return (x.reshape(a * s1, -1) @ wr).reshape(a, s1, s2, b)
    return mv


def zero_site_operator(L, R):
    a, b = L.shape[0], R.shape[0]
    lm = L.reshape(-1, L.shape[2])                     # (a w) x a'
    rm = R.transpose(1, 2, 0).reshape(-1, b)           # (w b') x b
    w = L.shape[1]

    def mv(c):
        x = (lm @ c).reshape(a, w, -1)                 # a w b'
        return x.reshape(a, -1) @ rm
    return mv


def apply_one_site(L, W, R, theta):
    return one_site_operator(L, W, R)(theta)


def apply_two_site(L, W1, W2, R, theta):
    return two_site_operator(L, W1, W2, R)(theta)


def apply_zero_site(L, R, c):
    return zero_site_operator(L, R)(c)


def boundary(dtype=complex):
    return np.ones((1, 1, 1), dtype=dtype)
