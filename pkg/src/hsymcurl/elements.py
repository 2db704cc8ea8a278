"""Matrix-valued finite elements for H(sym Curl) and comparison spaces.

Every shape function is stored as a short sum of *terms*
``s(xi) * M``, where ``s`` is a polynomial on the reference cell and ``M``
is a 3x3 matrix that is constant on each physical cell (built from the
cell's template vectors).  For affine cells this makes both the value
and the row-wise curl cheap to evaluate::

    Curl(s M) = M Anti(grad_x s)^T,    grad_x s = J^{-T} grad_xi s

Vector-valued H1 elements (displacements) use the same representation
with 3-vectors in place of matrices.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import tensor3 as t3
from .mesh import HEX_EDGES, HEX_REF_VERTICES, TET_EDGES, TET_FACES, affine_maps
from .polynomial import Poly, tabulate
from .quadrature import cell_rule
from .scalar_basis import (
    BARY_GRADS, BARYCENTRIC, cell_kernels, edge_kernel, face_kernels, hex_q1_basis, up_basis,
)

E = np.eye(3)
_XI, _ETA, _ZETA = Poly.var(0), Poly.var(1), Poly.var(2)


# --------------------------------------------------------------------------
# Piola maps and the orthogonal pair


def covariant_piola(emap, vartheta):
    """Push a reference vector field forward: ``theta = J^{-T} vartheta``."""
    return np.einsum("...ij,...j->...i", emap.JinvT, vartheta)


def curl_pushforward(emap, curl_ref):
    """Curl of a covariant field: ``(1/det J) J curl_xi``."""
    return np.einsum("...ij,...j->...i", emap.J, curl_ref) / np.asarray(emap.detJ)[..., None]


def _sgn(x):
    return np.where(x >= 0, 1.0, -1.0)


def orthogonal_pair(t):
    """Two vectors orthogonal to ``t`` depending only on ``t``.

    ``d2`` is built componentwise so that <d2, t> = 0 holds exactly, and
    ``d1 = d2 x t`` completes the pair.
    """
    t = np.asarray(t, dtype=float)
    if np.any(np.linalg.norm(t, axis=-1) == 0):
        raise ValueError("orthogonal pair of a zero tangent")
    a = np.abs(t)
    s = _sgn(t)
    d2 = np.stack([s[..., 0] * a[..., 2], s[..., 1] * a[..., 2],
                   -s[..., 2] * a[..., 0] - s[..., 2] * a[..., 1]], axis=-1)
    return np.cross(d2, t), d2


# --------------------------------------------------------------------------
# Per-cell geometry and template vectors


class CellFrame:
    """Geometry of a batch of cells in canonical vertex order."""

    def __init__(self, X, cell_type):
        self.X = np.asarray(X, dtype=float)
        self.cell_type = cell_type
        from .mesh import _map_from_vertices

        self.map = _map_from_vertices(self.X, cell_type, check_positive=False)
        self.n = len(self.X)
        self._cache = {}

    @classmethod
    def from_mesh(cls, mesh, cells=None):
        table = mesh.canonical_cells
        if cells is not None:
            table = table[cells]
        return cls(mesh.vertices[table], mesh.cell_type)

    @property
    def J(self):
        return self.map.J

    @property
    def Jinv(self):
        return self.map.Jinv

    @property
    def JinvT(self):
        return self.map.JinvT

    @property
    def detJ(self):
        return self.map.detJ

    @property
    def measure(self):
        return np.abs(self.map.detJ)

    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def const(self, v):
        return np.broadcast_to(np.asarray(v, dtype=float), (self.n,) + np.shape(v))

    def jinvt_col(self, k):
        return self.JinvT[:, :, k]

    def grad(self, i):
        return self._memo(("g", i), lambda: self.JinvT @ BARY_GRADS[i])

    def tangent(self, a, b):
        return self._memo(("t", a, b), lambda: self.X[:, b] - self.X[:, a])

    def normal(self, a, b, c):
        def f():
            p = sorted((a, b, c))
            return np.cross(self.X[:, p[1]] - self.X[:, p[0]], self.X[:, p[2]] - self.X[:, p[0]])
        return self._memo(("n",) + tuple(sorted((a, b, c))), f)

    def kappa(self, a, b, c):
        """Edge-face vector of edge (a, b) on the face with third vertex c."""
        sign = 1.0 if a < c < b else -1.0
        return sign * self.grad(c)

    def cotangent(self, a, b, c):
        def f():
            n = self.normal(a, b, c)
            k = self.kappa(a, b, c)
            nn = np.sum(n * n, axis=1)[:, None]
            return nn * k - n * np.sum(n * k, axis=1)[:, None]
        return self._memo(("m", a, b, c), f)

    def dpair(self, a, b):
        return self._memo(("d", a, b), lambda: orthogonal_pair(self.tangent(a, b)))


@dataclass
class TemplateFrame:
    """Physical template vectors of one cell (see ``template_frame``)."""

    tangents: dict
    kappas: dict
    normals: dict
    cotangents: dict
    dpairs: dict


def template_frame(vertices):
    """Template vectors of a single tetrahedron given its canonical vertices.

    Keys are local index tuples: edges ``(a, b)``, faces ``(a, b, c)``,
    edge-in-face ``(a, b, c)`` meaning edge (a, b) of the face with third
    vertex c.
    """
    fr = CellFrame(np.asarray(vertices, dtype=float)[None], "tet")
    tangents, kappas, cots, dp = {}, {}, {}, {}
    for a, b in TET_EDGES:
        tangents[(a, b)] = fr.tangent(a, b)[0]
        d1, d2 = fr.dpair(a, b)
        dp[(a, b)] = (d1[0], d2[0])
        for c in range(4):
            if c not in (a, b):
                kappas[(a, b, c)] = fr.kappa(a, b, c)[0]
                cots[(a, b, c)] = fr.cotangent(a, b, c)[0]
    normals = {f: fr.normal(*f)[0] for f in TET_FACES}
    return TemplateFrame(tangents, kappas, normals, cots, dp)


# --------------------------------------------------------------------------
# Term-based element description


def _outer(u, v):
    return lambda fr: np.einsum("ci,cj->cij", u(fr), v(fr))


def _vec_const(v):
    v = np.asarray(v, dtype=float)
    return lambda fr: fr.const(v)


def _mat_const(M):
    M = np.asarray(M, dtype=float)
    return lambda fr: fr.const(M)


@dataclass
class Term:
    func: int
    poly: int
    rule: object
    identity: bool = False


class _PolySet:
    def __init__(self):
        self.polys, self._index = [], {}

    def add(self, p):
        key = p.key()
        if key not in self._index:
            self._index[key] = len(self.polys)
            self.polys.append(p)
        return self._index[key]


@dataclass
class TermTable:
    """Flattened term list: function index, polynomial index, matrix builder."""

    polys: list
    func: np.ndarray
    poly: np.ndarray
    n_funcs: int
    build: object = field(repr=False)

    @property
    def n_terms(self):
        return len(self.func)

    @cached_property
    def degree(self):
        return max((p.degree for p in self.polys), default=0)


@dataclass
class ElementBasis:
    """Catalogue of shape functions of one element kind.

    ``assoc[i] = (dim, local entity, slot)`` gives the polytope association
    of function ``i``; functions attached to the same global entity are
    shared between neighbouring cells.
    """

    kind: str
    cell_type: str
    rank: int
    polys: list
    terms: list
    assoc: list
    identity: np.ndarray

    def __len__(self):
        return len(self.assoc)

    @property
    def dim(self):
        return len(self.assoc)

    @cached_property
    def degree(self):
        return max(self.polys[t.poly].degree for t in self.terms)

    @cached_property
    def block_sizes(self):
        sizes = [0, 0, 0, 0]
        for d, ent, slot in self.assoc:
            sizes[d] = max(sizes[d], slot + 1)
        return tuple(sizes)

    def dof_table(self):
        return np.array(self.assoc, dtype=int).reshape(-1, 3)

    @cached_property
    def values(self):
        func = np.array([t.func for t in self.terms])
        poly = np.array([t.poly for t in self.terms])
        rules = [t.rule for t in self.terms]

        def build(fr):
            return np.stack([r(fr) for r in rules], axis=1)

        return TermTable(self.polys, func, poly, self.dim, build)

    @cached_property
    def symcurl(self):
        """Terms of sym Curl (matrix elements) via the affine product rule."""
        if self.rank != 2:
            raise TypeError("sym Curl needs a matrix-valued element")
        ps = _PolySet()
        func, poly, src, axis = [], [], [], []
        for ti, t in enumerate(self.terms):
            if t.identity:
                continue
            for k in range(3):
                dp = self.polys[t.poly].deriv(k)
                if dp.is_zero():
                    continue
                func.append(t.func)
                poly.append(ps.add(dp))
                src.append(ti)
                axis.append(k)
        src, axis = np.array(src, dtype=int), np.array(axis, dtype=int)
        base = self.values

        def build(fr):
            M = base.build(fr)[:, src]
            c = np.moveaxis(fr.JinvT[:, :, axis], 2, 1)
            curl = np.cross(c[:, :, None, :], M)
            return t3.sym(curl)

        return TermTable(ps.polys, np.array(func, dtype=int), np.array(poly, dtype=int),
                         self.dim, build)

    @cached_property
    def gradient(self):
        """Terms of the gradient D u (vector elements)."""
        if self.rank != 1:
            raise TypeError("gradient table needs a vector-valued element")
        ps = _PolySet()
        func, poly, src, axis = [], [], [], []
        for ti, t in enumerate(self.terms):
            for k in range(3):
                dp = self.polys[t.poly].deriv(k)
                if dp.is_zero():
                    continue
                func.append(t.func)
                poly.append(ps.add(dp))
                src.append(ti)
                axis.append(k)
        src, axis = np.array(src, dtype=int), np.array(axis, dtype=int)
        base = self.values

        def build(fr):
            v = base.build(fr)[:, src]
            c = np.moveaxis(fr.JinvT[:, :, axis], 2, 1)
            return np.einsum("cti,ctj->ctij", v, c)

        return TermTable(ps.polys, np.array(func, dtype=int), np.array(poly, dtype=int),
                         self.dim, build)

    def evaluate(self, fr, ref_pts, table="values"):
        """Evaluate all functions at per-cell reference points.

        ``ref_pts`` has shape (npts, 3) or (ncells, npts, 3); returns
        (ncells, npts, nfuncs, 3[, 3]).
        """
        tab = getattr(self, table)
        mats = tab.build(fr)
        S = tabulate(tab.polys, ref_pts)
        if S.ndim == 2:
            S = np.broadcast_to(S, (fr.n,) + S.shape)
        vals = np.einsum("cqt,ct...->cqt...", S[:, :, tab.poly], mats)
        return segment_sum(vals, tab.func, self.dim, axis=2)


def segment_sum(arr, func, n, axis):
    """Sum slices of ``arr`` along ``axis`` grouped by the sorted labels ``func``."""
    shape = list(arr.shape)
    shape[axis] = n
    out = np.zeros(shape)
    if len(func) == 0:
        return out
    starts = np.flatnonzero(np.r_[True, func[1:] != func[:-1]])
    red = np.add.reduceat(arr, starts, axis=axis)
    idx = [slice(None)] * arr.ndim
    idx[axis] = func[starts]
    out[tuple(idx)] = red
    return out


class _Builder:
    def __init__(self, kind, cell_type, rank=2):
        self.kind, self.cell_type, self.rank = kind, cell_type, rank
        self.ps = _PolySet()
        self.terms, self.assoc, self.identity = [], [], []

    def add(self, assoc, parts, identity=False):
        f = len(self.assoc)
        self.assoc.append(tuple(assoc))
        self.identity.append(identity)
        for poly, rule in parts:
            self.terms.append(Term(f, self.ps.add(poly), rule, identity))

    def next_slot(self, dim, ent):
        return sum(1 for a in self.assoc if a[0] == dim and a[1] == ent)

    def done(self):
        return ElementBasis(self.kind, self.cell_type, self.rank, self.ps.polys, self.terms,
                            self.assoc, np.array(self.identity, dtype=bool))


def _g(i):
    return lambda fr: fr.grad(i)


def _t(a, b):
    return lambda fr: fr.tangent(a, b)


def _n(a, b, c):
    return lambda fr: fr.normal(a, b, c)


def _k(a, b, c):
    return lambda fr: fr.kappa(a, b, c)


def _m(a, b, c):
    return lambda fr: fr.cotangent(a, b, c)


def _d(a, b, which):
    return lambda fr: fr.dpair(a, b)[which]


def _col(k):
    return lambda fr: fr.jinvt_col(k)


def _identity_rule(fr):
    return fr.const(E)


def _add_nedelec(b, second_kind):
    lam = BARYCENTRIC
    for e, (i, j) in enumerate(TET_EDGES):
        for r in range(3):
            er = _vec_const(E[r])
            b.add((1, e, r), [(lam[i], _outer(er, _g(j))),
                              (-lam[j], _outer(er, _g(i)))])
    if second_kind:
        for e, (i, j) in enumerate(TET_EDGES):
            q = edge_kernel(i, j, 2)
            for r in range(3):
                er = _vec_const(E[r])
                parts = [(q.deriv(k), _outer(er, _col(k))) for k in range(3)]
                b.add((1, e, 3 + r), [p for p in parts if not p[0].is_zero()])


def _add_identities(b, scalars):
    for q in scalars:
        b.add((3, 0, b.next_slot(3, 0)), [(q, _identity_rule)], identity=True)


def _edge_scalars(degrees):
    return [edge_kernel(i, j, k) for (i, j) in TET_EDGES for k in degrees]


def _face_scalars(degrees):
    return [q for f in TET_FACES for d in degrees for q in face_kernels(*f, d)]


def _cell_scalars(degrees):
    return [q for d in degrees for q in cell_kernels(d)]


def nedelec_bases(kind):
    """Row-wise Nedelec elements: 'I0' (lowest order) or 'II1' (full linear)."""
    if kind not in ("I0", "II1"):
        raise ValueError("kind must be 'I0' or 'II1'")
    b = _Builder("NI0" if kind == "I0" else "NII1", "tet")
    _add_nedelec(b, kind == "II1")
    return b.done()


def y0_basis():
    b = _Builder("Y0", "tet")
    _add_nedelec(b, False)
    _add_identities(b, [2 * _XI - 1, 2 * _ETA - 1, 2 * _ZETA - 1])
    return b.done()


def s0_basis():
    b = _Builder("S0", "tet")
    _add_nedelec(b, False)
    _add_identities(b, [2 * _XI - 1, 2 * _ETA - 1, 2 * _ZETA - 1])
    _add_identities(b, _edge_scalars([2]))
    return b.done()


def y1_basis():
    b = _Builder("Y1", "tet")
    _add_nedelec(b, True)
    _add_identities(b, _edge_scalars([2]))
    return b.done()


def s1_basis():
    b = _Builder("S1", "tet")
    _add_nedelec(b, True)
    _add_identities(b, _edge_scalars([2]))
    _add_identities(b, _edge_scalars([3]) + _face_scalars([3]))
    return b.done()


def _face_edges(f):
    a, b, c = TET_FACES[f]
    return ((a, b, c), (a, c, b), (b, c, a))


def _higher_order(p, kind):
    if p not in (2, 3):
        raise ValueError("supported orders are p = 2 and p = 3")
    b = _Builder(f"{kind}{p}", "tet")
    _add_nedelec(b, True)
    edge_deg = range(2, p + 1)
    # edge functions  n d (x) t
    for e, (i, j) in enumerate(TET_EDGES):
        for k in edge_deg:
            q = edge_kernel(i, j, k)
            for which in (0, 1):
                b.add((1, e, b.next_slot(1, e)), [(q, _outer(_d(i, j, which), _t(i, j)))])
    # face functions
    for f, face in enumerate(TET_FACES):
        nrm = _n(*face)
        for (i, j, c) in _face_edges(f):
            for k in edge_deg:
                q = edge_kernel(i, j, k)
                kap = _k(i, j, c)
                for v in (_t(i, j), _m(i, j, c), nrm):
                    b.add((2, f, b.next_slot(2, f)), [(q, _outer(v, kap))])
        i, j, c = _face_edges(f)[0]
        t, m = _t(i, j), _m(i, j, c)
        for d in range(3, p + 1):
            for q in face_kernels(*face, d):
                for rule in (_outer(t, m), _outer(m, t), _tt_minus_mm(t, m)):
                    b.add((2, f, b.next_slot(2, f)), [(q, rule)])
                for v in (t, m):
                    b.add((2, f, b.next_slot(2, f)), [(q, _outer(nrm, v))])
    # cell identities
    top = p + 1 if kind == "Y" else p
    _add_identities(b, _edge_scalars(range(2, top + 1)) + _face_scalars(range(3, top + 1))
                    + _cell_scalars(range(4, top + 1)))
    # cell functions from faces: n v (x) n_f
    for f, face in enumerate(TET_FACES):
        nrm = _n(*face)
        i, j, c = _face_edges(f)[0]
        for d in range(3, p + 1):
            for q in face_kernels(*face, d):
                for v in (_t(i, j), _m(i, j, c), nrm):
                    b.add((3, 0, b.next_slot(3, 0)), [(q, _outer(v, nrm))])
    return b.done()


def _tt_minus_mm(t, m):
    """Rule for the traceless pair t (x) t - m (x) m."""
    return lambda fr: (np.einsum("ci,cj->cij", t(fr), t(fr))
                       - np.einsum("ci,cj->cij", m(fr), m(fr)))


def yp_basis(p):
    return _higher_order(p, "Y")


def mp_basis(p):
    return _higher_order(p, "M")


def comparison_bases(kind):
    """'L1mat': all nine components continuous P1; 'D1': continuous
    deviatoric P1 plus cell-wise linear identities."""
    lam = BARYCENTRIC
    if kind == "L1mat":
        b = _Builder("L1", "tet")
        for i in range(4):
            for r in range(3):
                for s in range(3):
                    b.add((0, i, 3 * r + s), [(lam[i], _mat_const(np.outer(E[r], E[s])))])
        return b.done()
    if kind == "D1":
        b = _Builder("D1", "tet")
        for i in range(4):
            for slot, T in enumerate(SL3_BASIS):
                b.add((0, i, slot), [(lam[i], _mat_const(T))])
        _add_identities(b, list(lam))
        return b.done()
    raise ValueError("kind must be 'L1mat' or 'D1'")


SL3_BASIS = tuple(
    [np.outer(E[r], E[s]) for r in range(3) for s in range(3) if r != s]
    + [np.diag([1.0, -1.0, 0.0]), np.diag([0.0, 1.0, -1.0])]
)


def _hex_rule(rho):
    rho = np.asarray(rho, dtype=float)
    return lambda fr: fr.J @ rho @ fr.Jinv


def hex_s0_basis():
    """Lowest-order hexahedral element on axis-aligned cuboids."""
    lam = hex_q1_basis()
    b = _Builder("HexS0", "hex")
    D1 = np.diag([1.0, -1.0, 0.0])
    D2 = np.diag([0.0, 1.0, -1.0])
    for i in range(8):
        b.add((0, i, 0), [(lam[i], _hex_rule(D1))])
        b.add((0, i, 1), [(lam[i], _hex_rule(D2))])
    for e, (i, j) in enumerate(HEX_EDGES):
        axis = int(np.flatnonzero(HEX_REF_VERTICES[j] != HEX_REF_VERTICES[i])[0])
        tau, mu, nu = E[axis], E[(axis + 1) % 3], E[(axis + 2) % 3]
        q = lam[i] + lam[j]
        b.add((1, e, 0), [(q, _hex_rule(np.outer(mu, tau)))])
        b.add((1, e, 1), [(q, _hex_rule(np.outer(nu, tau)))])
    for i in range(8):
        b.add((3, 0, i), [(lam[i], _identity_rule)], identity=True)
    return b.done()


def vector_h1(p):
    """Vector-valued hierarchical H1 element [U^p]^3 (displacements)."""
    sb = up_basis(p)
    b = _Builder(f"U{p}", "tet", rank=1)
    for q, (dim, ent, slot) in zip(sb.functions, sb.association):
        for r in range(3):
            b.add((dim, ent, 3 * slot + r), [(q, _vec_const(E[r]))])
    return b.done()


_FACTORIES = {
    "NI0": lambda: nedelec_bases("I0"),
    "NII1": lambda: nedelec_bases("II1"),
    "Y0": y0_basis,
    "S0": s0_basis,
    "Y1": y1_basis,
    "S1": s1_basis,
    "Y2": lambda: yp_basis(2),
    "M2": lambda: mp_basis(2),
    "Y3": lambda: yp_basis(3),
    "M3": lambda: mp_basis(3),
    "L1": lambda: comparison_bases("L1mat"),
    "D1": lambda: comparison_bases("D1"),
    "HexS0": hex_s0_basis,
    "U1": lambda: vector_h1(1),
    "U2": lambda: vector_h1(2),
}

ELEMENT_KINDS = tuple(_FACTORIES)
_CACHE = {}


def get_element(kind):
    """Element by short name (cached)."""
    if kind not in _FACTORIES:
        raise ValueError(f"unknown element {kind!r}; choose from {', '.join(ELEMENT_KINDS)}")
    if kind not in _CACHE:
        _CACHE[kind] = _FACTORIES[kind]()
    return _CACHE[kind]


def reference_frame(cell_type="tet"):
    X = HEX_REF_VERTICES if cell_type == "hex" else np.array(
        [[0.0, 0, 0], [0, 0, 1], [0, 1, 0], [1, 0, 0]])
    return CellFrame(X[None], cell_type)


def reference_tabulation(elem, degree=None, frame=None):
    """Values and sym Curl of ``elem`` at a reference rule, for rank checks."""
    fr = frame or reference_frame(elem.cell_type)
    rule = cell_rule(elem.cell_type, degree if degree is not None else 2 * elem.degree + 4)
    vals = elem.evaluate(fr, rule.points)[0]
    curl = elem.evaluate(fr, rule.points, "symcurl")[0] if elem.rank == 2 else None
    return rule, vals, curl
