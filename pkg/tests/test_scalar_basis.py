from itertools import combinations
from math import comb

import numpy as np
import pytest

from hsymcurl.mesh import TET_EDGES, TET_FACES, TET_REF_VERTICES
from hsymcurl.polynomial import Poly, tabulate, tabulate_grad
from hsymcurl.scalar_basis import (
    BARY_GRADS, MAX_ORDER, barycentric, hex_q1_basis, up_basis,
)


def _sample_simplex(rng, n, verts):
    w = rng.dirichlet(np.ones(len(verts)), size=n)
    return w @ verts


def test_barycentric_examples():
    lam, grads = barycentric([0.0, 0, 0])
    assert np.allclose(lam, [1, 0, 0, 0])
    lam, _ = barycentric([0.25, 0.25, 0.25])
    assert np.allclose(lam, 0.25)
    assert np.allclose(grads[0], [-1, -1, -1])
    assert np.allclose(grads.sum(axis=0), 0)


def test_low_order_dimensions():
    b = up_basis(1)
    assert len(b) == 4 and b.block_sizes() == (1, 0, 0, 0)
    b = up_basis(2)
    assert len(b) == 10
    b = up_basis(3)
    assert b.block_sizes() == (1, 2, 1, 0) and len(b) == 20


@pytest.mark.parametrize("p", range(1, MAX_ORDER + 1))
def test_block_dimensions(p):
    b = up_basis(p)
    assert b.block_sizes() == (1, p - 1, (p - 2) * (p - 1) // 2, (p - 3) * (p - 2) * (p - 1) // 6)
    assert len(b) == comb(p + 3, 3)


@pytest.mark.parametrize("p", range(1, MAX_ORDER + 1))
def test_polynomial_reproduction(p, rng):
    b = up_basis(p)
    x = rng.random((100, 3)) / 3
    monos = [(i, j, k) for i in range(p + 1) for j in range(p + 1 - i) for k in range(p + 1 - i - j)]
    coeffs = rng.standard_normal(len(monos))
    target = tabulate([Poly(dict(zip(monos, coeffs)))], x)[:, 0]
    V = b.values(x)
    c, *_ = np.linalg.lstsq(V, target, rcond=None)
    assert np.abs(V @ c - target).max() <= 1e-10 * max(1, np.abs(target).max())
    assert np.linalg.matrix_rank(V) == len(b)


@pytest.mark.parametrize("p", range(2, MAX_ORDER + 1))
def test_edge_and_face_locality(p, rng):
    b = up_basis(p)
    t = np.linspace(0, 1, 20)
    for (dim, ent, _), q in zip(b.association, b.functions):
        if dim == 1:
            for e, (i, j) in enumerate(TET_EDGES):
                if e == ent:
                    continue
                pts = TET_REF_VERTICES[i] + t[:, None] * (TET_REF_VERTICES[j] - TET_REF_VERTICES[i])
                assert np.abs(q(pts)).max() <= 1e-13
        if dim in (2, 3):
            for f, face in enumerate(TET_FACES):
                if dim == 2 and f == ent:
                    continue
                pts = _sample_simplex(rng, 20, TET_REF_VERTICES[list(face)])
                assert np.abs(q(pts)).max() <= 1e-13


def test_quadratic_edge_functions_are_barycentric_products():
    b = up_basis(2)
    lam = [Poly({(0, 0, 0): 1, (1, 0, 0): -1, (0, 1, 0): -1, (0, 0, 1): -1}),
           Poly.var(2), Poly.var(1), Poly.var(0)]
    x = np.random.default_rng(0).random((30, 3)) / 3
    for (dim, ent, _), q in zip(b.association, b.functions):
        if dim == 1:
            i, j = TET_EDGES[ent]
            ratio = q(x) / (lam[i] * lam[j])(x)
            assert np.allclose(ratio, ratio[0])


@pytest.mark.parametrize("p", [1, 3, 5])
def test_gradients_match_finite_differences(p, rng):
    b = up_basis(p)
    x = 0.1 + 0.15 * rng.random((10, 3))
    G = tabulate_grad(b.functions, x)
    h = 1e-6
    for k in range(3):
        dx = np.zeros(3)
        dx[k] = h
        fd = (b.values(x + dx) - b.values(x - dx)) / (2 * h)
        assert np.abs(fd - G[..., k]).max() <= 1e-6 * max(1.0, np.abs(G).max())


def test_unsupported_order():
    for p in (0, MAX_ORDER + 1):
        with pytest.raises(ValueError):
            up_basis(p)


def test_hex_q1():
    lam = hex_q1_basis()
    x = np.array([[1.0, 1, 1], [0.3, 0.7, 0.2], [0.5, 0.5, 0.5]])
    V = tabulate(lam, x)
    assert np.isclose(V[0, 6], 1.0)
    assert np.isclose(V[1].sum(), 1.0)
    g = tabulate_grad(lam, x[2:])[0, 0]
    assert np.allclose(g, -0.25)
    from hsymcurl.mesh import HEX_REF_VERTICES
    assert np.allclose(tabulate(lam, HEX_REF_VERTICES), np.eye(8))


def test_barycentric_gradients_constant():
    assert np.array_equal(BARY_GRADS, barycentric(np.zeros((5, 3)))[1])
