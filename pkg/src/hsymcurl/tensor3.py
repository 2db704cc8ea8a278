"""Small-tensor algebra on 3x3 matrices.

All functions accept arrays with arbitrary leading batch dimensions, so
``anti(v)`` works for a single vector of shape ``(3,)`` as well as for a
stack of shape ``(..., 3)``.
"""
from dataclasses import dataclass

import numpy as np

IDENTITY = np.eye(3)


def sym(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def skw(M):
    return 0.5 * (M - np.swapaxes(M, -1, -2))


def trace(M):
    return np.trace(M, axis1=-2, axis2=-1)


def dev(M):
    return M - trace(M)[..., None, None] / 3.0 * IDENTITY


def decompose(M):
    """Split ``M`` into (dev sym M, skw M, tr(M)/3 * I).

    The three parts are mutually orthogonal in the Frobenius product and
    sum to ``M``.
    """
    M = np.asarray(M, dtype=float)
    vol = trace(M)[..., None, None] / 3.0 * IDENTITY
    return sym(M) - vol, skw(M), vol


def anti(v):
    """Skew matrix with ``anti(v) @ w == cross(v, w)``."""
    v = np.asarray(v, dtype=float)
    A = np.zeros(v.shape[:-1] + (3, 3))
    A[..., 0, 1] = -v[..., 2]
    A[..., 0, 2] = v[..., 1]
    A[..., 1, 0] = v[..., 2]
    A[..., 1, 2] = -v[..., 0]
    A[..., 2, 0] = -v[..., 1]
    A[..., 2, 1] = v[..., 0]
    return A


def trace_hcurl(P, n):
    """Tangential trace ``P @ anti(n).T``; row i equals ``n x P_i``."""
    P = np.asarray(P, dtype=float)
    return P @ np.swapaxes(anti(n), -1, -2)


def trace_hsymcurl(P, n):
    """Symmetric part of the tangential trace."""
    return sym(trace_hcurl(P, n))


def frob(A, B):
    return np.sum(A * B, axis=(-2, -1))


@dataclass(frozen=True)
class IsotropicTensor4:
    """Isotropic fourth-order tensor ``S -> 2 mu S + lam tr(S) I``."""

    mu: float
    lam: float = 0.0

    def __call__(self, S):
        return apply_isotropic(self, S)


def apply_isotropic(C, S):
    S = np.asarray(S, dtype=float)
    return 2.0 * C.mu * S + C.lam * trace(S)[..., None, None] * IDENTITY
