"""Hierarchical H1 basis on the reference tetrahedron and the Q1 cube basis.

Edge functions use scaled integrated Legendre polynomials in the
barycentric pair of the edge; face and cell bubbles are products of the
face/cell barycentrics with monomials in those barycentrics.  Local
vertex order is the canonical (ascending global id) order, so the
parity of the edge kernels never needs a sign flip.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .mesh import HEX_REF_VERTICES, TET_EDGES, TET_FACES
from .polynomial import Poly, tabulate, tabulate_grad

MAX_ORDER = 5

_XI, _ETA, _ZETA = Poly.var(0), Poly.var(1), Poly.var(2)
BARYCENTRIC = (1 - _XI - _ETA - _ZETA, _ZETA, _ETA, _XI)
BARY_GRADS = np.array([[-1.0, -1.0, -1.0], [0, 0, 1], [0, 1, 0], [1, 0, 0]])


def barycentric(point):
    """Barycentrics and their (constant) gradients at reference points."""
    p = np.asarray(point, dtype=float)
    lam = np.stack([1 - p[..., 0] - p[..., 1] - p[..., 2], p[..., 2], p[..., 1], p[..., 0]],
                   axis=-1)
    return lam, BARY_GRADS.copy()


def _scaled_legendre(s, t, kmax):
    P = [Poly.const(1.0), s]
    for k in range(2, kmax + 1):
        P.append(((2 * k - 1) * s * P[k - 1] - (k - 1) * (t * t) * P[k - 2]) / k)
    return P


@lru_cache(maxsize=None)
def edge_kernel(a, b, k):
    """Degree-k edge function of local edge (a, b); vanishes on other edges."""
    if k < 2:
        raise ValueError("edge functions start at degree 2")
    la, lb = BARYCENTRIC[a], BARYCENTRIC[b]
    s, t = lb - la, la + lb
    P = _scaled_legendre(s, t, k)
    return (P[k] - t * t * P[k - 2]) / (2 * k - 1)


@lru_cache(maxsize=None)
def face_kernels(a, b, c, deg):
    """Face bubbles of exact degree ``deg`` (>= 3) on local face (a, b, c)."""
    la, lb, lc = BARYCENTRIC[a], BARYCENTRIC[b], BARYCENTRIC[c]
    bub = la * lb * lc
    m = deg - 3
    return tuple(bub * la ** i * lb ** (m - i) for i in range(m, -1, -1))


@lru_cache(maxsize=None)
def cell_kernels(deg):
    """Cell bubbles of exact degree ``deg`` (>= 4)."""
    l0, l1, l2, l3 = BARYCENTRIC
    bub = l0 * l1 * l2 * l3
    m = deg - 4
    out = []
    for i in range(m, -1, -1):
        for j in range(m - i, -1, -1):
            out.append(bub * l0 ** i * l1 ** j * l2 ** (m - i - j))
    return tuple(out)


def edge_functions(e, degrees):
    a, b = TET_EDGES[e]
    return [edge_kernel(a, b, k) for k in degrees]


def face_functions(f, degrees):
    a, b, c = TET_FACES[f]
    return [q for d in degrees for q in face_kernels(a, b, c, d)]


def cell_functions(degrees):
    return [q for d in degrees for q in cell_kernels(d)]


@dataclass
class ScalarBasis:
    """U^p on the reference tetrahedron, grouped by polytope."""

    order: int
    vertex: list
    edge: list
    face: list
    cell: list
    functions: list = field(default_factory=list)
    association: list = field(default_factory=list)

    def __post_init__(self):
        self.functions, self.association = [], []
        for i, q in enumerate(self.vertex):
            self.functions.append(q)
            self.association.append((0, i, 0))
        for dim, blocks in ((1, self.edge), (2, self.face)):
            for ent, block in enumerate(blocks):
                for slot, q in enumerate(block):
                    self.functions.append(q)
                    self.association.append((dim, ent, slot))
        for slot, q in enumerate(self.cell):
            self.functions.append(q)
            self.association.append((3, 0, slot))

    def __len__(self):
        return len(self.functions)

    def block_sizes(self):
        return (1, len(self.edge[0]) if self.edge else 0,
                len(self.face[0]) if self.face else 0, len(self.cell))

    def values(self, pts):
        return tabulate(self.functions, pts)

    def gradients(self, pts):
        return tabulate_grad(self.functions, pts)


def up_basis(p):
    if not (1 <= p <= MAX_ORDER):
        raise ValueError(f"order must be in 1..{MAX_ORDER}")
    deg_e = range(2, p + 1)
    deg_f = range(3, p + 1)
    deg_c = range(4, p + 1)
    return ScalarBasis(
        order=p,
        vertex=list(BARYCENTRIC),
        edge=[edge_functions(e, deg_e) for e in range(6)],
        face=[face_functions(f, deg_f) for f in range(4)],
        cell=cell_functions(deg_c),
    )


def hex_q1_basis():
    """Trilinear vertex functions of the unit cube in VTK vertex order."""
    out = []
    one = Poly.const(1.0)
    for v in HEX_REF_VERTICES:
        q = one
        for axis, var in enumerate((_XI, _ETA, _ZETA)):
            q = q * (var if v[axis] == 1 else 1 - var)
        out.append(q)
    return out
