"""Quadrature on the reference tetrahedron, triangle and unit cube.

Simplex rules are conical products of Gauss-Jacobi nodes (collapsed
coordinates); the cube uses tensor Gauss-Legendre.  Reference cells:

* tetrahedron ``{xi, eta, zeta >= 0, xi + eta + zeta <= 1}`` (volume 1/6)
* triangle ``{s, t >= 0, s + t <= 1}`` (area 1/2)
* cube ``[0, 1]^3``
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = 20


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)


def _check(degree):
    if not (0 <= int(degree) <= MAX_DEGREE):
        raise ValueError(f"unsupported quadrature degree {degree} (0..{MAX_DEGREE})")
    return int(degree)


def _gauss_jacobi01(n, alpha):
    """Nodes/weights on [0, 1] for the weight (1 - x)^alpha."""
    x, w = roots_jacobi(n, alpha, 0.0)
    return 0.5 * (x + 1.0), w / 2.0 ** (alpha + 1)


def _npoints(degree):
    return degree // 2 + 1


@lru_cache(maxsize=None)
def tet_rule(degree):
    degree = _check(degree)
    n = _npoints(degree)
    u, wu = _gauss_jacobi01(n, 0.0)
    v, wv = _gauss_jacobi01(n, 1.0)
    w, ww = _gauss_jacobi01(n, 2.0)
    U, V, W = np.meshgrid(u, v, w, indexing="ij")
    weights = np.einsum("i,j,k->ijk", wu, wv, ww).ravel()
    z = W.ravel()
    y = V.ravel() * (1.0 - z)
    x = U.ravel() * (1.0 - V.ravel()) * (1.0 - z)
    pts = np.column_stack([x, y, z])
    pts.flags.writeable = False
    weights.flags.writeable = False
    return QuadRule(pts, weights, degree)


@lru_cache(maxsize=None)
def tri_rule(degree):
    degree = _check(degree)
    n = _npoints(degree)
    u, wu = _gauss_jacobi01(n, 0.0)
    v, wv = _gauss_jacobi01(n, 1.0)
    U, V = np.meshgrid(u, v, indexing="ij")
    weights = np.outer(wu, wv).ravel()
    t = V.ravel()
    s = U.ravel() * (1.0 - t)
    pts = np.column_stack([s, t])
    pts.flags.writeable = False
    weights.flags.writeable = False
    return QuadRule(pts, weights, degree)


@lru_cache(maxsize=None)
def hex_rule(degree):
    degree = _check(degree)
    n = _npoints(degree)
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    weights = np.einsum("i,j,k->ijk", w, w, w).ravel()
    pts.flags.writeable = False
    weights.flags.writeable = False
    return QuadRule(pts, weights, degree)


def cell_rule(cell_type, degree):
    if cell_type == "tet":
        return tet_rule(degree)
    if cell_type == "hex":
        return hex_rule(degree)
    raise ValueError(f"unknown cell type {cell_type!r}")
