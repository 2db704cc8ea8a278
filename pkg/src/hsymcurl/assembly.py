"""Global assembly: dof maps, projection and relaxed micromorphic systems.

Bilinear forms are evaluated in term space.  With ``u = sum_t s_t(xi) A_t``
and ``v = sum_t' r_t'(xi) B_t'`` on an affine cell,

    int_T <C u, v> = |det J| sum_{t,t'} <C A_t, B_t'> int_ref s_t r_t'

so only exact reference integrals of polynomial products and small
per-cell Gram matrices are needed.  Loads and errors use quadrature.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import tensor3 as t3
from .elements import CellFrame, segment_sum
from .polynomial import tabulate
from .quadrature import cell_rule, tri_rule
from .solver import SingularMatrixError, cg_solve, dense_solve

_CHUNK_BUDGET = 3_000_000


# --------------------------------------------------------------------------
# Degrees of freedom


@dataclass
class DofMap:
    """Local-to-global numbering of one element on one mesh.

    Shape functions are defined on the canonical (ascending id) vertex
    order, so every shared function is identical from both sides and all
    orientation signs are +1.
    """

    cell_dofs: np.ndarray
    signs: np.ndarray
    n_dofs: int
    dof_dim: np.ndarray
    dof_entity: np.ndarray
    on_boundary: np.ndarray
    is_cell: np.ndarray
    offsets: tuple


def _boundary_entities(mesh, sides=None):
    bf = mesh.boundary_faces(sides)
    faces = mesh.faces[bf]
    verts = np.unique(faces)
    if faces.shape[1] == 3:
        pairs = np.concatenate([faces[:, [0, 1]], faces[:, [0, 2]], faces[:, [1, 2]]])
    else:
        pairs = np.concatenate([faces[:, [i, (i + 1) % 4]] for i in range(4)])
    pairs = np.sort(pairs, axis=1)
    nv = mesh.n_vertices
    keys = mesh.edges[:, 0] * nv + mesh.edges[:, 1]
    edges = np.unique(np.searchsorted(keys, pairs[:, 0] * nv + pairs[:, 1]))
    return verts, edges, bf


def build_dofmap(mesh, elem):
    if elem.cell_type != mesh.cell_type:
        raise ValueError(f"element {elem.kind} needs a {elem.cell_type} mesh")
    bs = elem.block_sizes
    counts = mesh.entity_counts()
    sizes = [c * b for c, b in zip(counts, bs)]
    offsets = tuple(int(x) for x in np.concatenate([[0], np.cumsum(sizes)[:-1]]))
    n_dofs = int(sum(sizes))
    tables = (mesh.canonical_cells, mesh.cell_edges, mesh.cell_faces,
              np.arange(mesh.n_cells)[:, None])
    tab = elem.dof_table()
    cell_dofs = np.empty((mesh.n_cells, len(tab)), dtype=np.int64)
    for b, (d, ent, slot) in enumerate(tab):
        cell_dofs[:, b] = offsets[d] + tables[d][:, ent] * bs[d] + slot

    dof_dim = np.concatenate([np.full(s, d) for d, s in enumerate(sizes)]).astype(int)
    dof_entity = np.concatenate(
        [np.repeat(np.arange(c), b) for c, b in zip(counts, bs)]).astype(int)
    verts, edges, bf = _boundary_entities(mesh)
    bnd_ent = [np.zeros(c, dtype=bool) for c in counts]
    bnd_ent[0][verts] = True
    bnd_ent[1][edges] = True
    bnd_ent[2][bf] = True
    on_boundary = np.zeros(n_dofs, dtype=bool)
    for d in range(3):
        sel = dof_dim == d
        on_boundary[sel] = bnd_ent[d][dof_entity[sel]]
    identity_dofs = np.unique(cell_dofs[:, elem.identity])
    on_boundary[identity_dofs] = False
    return DofMap(cell_dofs, np.ones_like(cell_dofs, dtype=np.int8), n_dofs, dof_dim,
                  dof_entity, on_boundary, dof_dim == 3, offsets)


# --------------------------------------------------------------------------
# Term-space bilinear forms

_REF = {}


def ref_mass(tab_a, tab_b, cell_type):
    """Exact reference integrals of all products of the two polynomial lists."""
    key = (id(tab_a), id(tab_b), cell_type)
    hit = _REF.get(key)
    if hit is None:
        rule = cell_rule(cell_type, tab_a.degree + tab_b.degree)
        Sa = tabulate(tab_a.polys, rule.points)
        Sb = tabulate(tab_b.polys, rule.points)
        R = (Sa * rule.weights[:, None]).T @ Sb
        hit = (tab_a, tab_b, R)
        _REF[key] = hit
    return hit[2]


def gram_frob(A, B):
    nc = A.shape[0]
    return A.reshape(nc, A.shape[1], -1) @ B.reshape(nc, B.shape[1], -1).transpose(0, 2, 1)


def gram_isotropic(mu, lam):
    """<C sym A, sym B> with C = 2 mu J + lam 1 (x) 1 (per-cell moduli)."""
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)

    def g(A, B):
        G = 2.0 * mu[:, None, None] * gram_frob(t3.sym(A), t3.sym(B))
        if np.any(lam != 0):
            G += lam[:, None, None] * t3.trace(A)[:, :, None] * t3.trace(B)[:, None, :]
        return G
    return g


def gram_skew(mu_c):
    mu_c = np.asarray(mu_c, dtype=float)
    return lambda A, B: 2.0 * mu_c[:, None, None] * gram_frob(t3.skw(A), t3.skw(B))


def local_form(tab_a, mats_a, tab_b, mats_b, measure, gram, cell_type):
    R = ref_mass(tab_a, tab_b, cell_type)[np.ix_(tab_a.poly, tab_b.poly)]
    G = gram(mats_a, mats_b)
    G *= R[None]
    G *= measure[:, None, None]
    G = segment_sum(G, tab_a.func, tab_a.n_funcs, axis=1)
    return segment_sum(G, tab_b.func, tab_b.n_funcs, axis=2)


def _chunks(n, per_cell):
    size = max(1, int(_CHUNK_BUDGET // max(per_cell, 1)))
    for s in range(0, n, size):
        yield np.arange(s, min(n, s + size))


def _centroid_points(fr, npts):
    c = fr.X.mean(axis=1)
    return np.broadcast_to(c[:, None, :], (fr.n, npts, 3))


def _check_resolved(mesh, target):
    for axis, val in getattr(target, "jump_planes", ()):
        x = mesh.vertices[mesh.cells][:, :, axis] - val
        tol = 1e-10
        if np.any((x.max(axis=1) > tol) & (x.min(axis=1) < -tol)):
            raise ValueError(f"mesh does not resolve the jump plane x[{axis}] = {val}")


def _eval_target(target, x, fr):
    return np.asarray(target(x, _centroid_points(fr, x.shape[1])), dtype=float)


def local_load(elem, fr, target, rule):
    tab = elem.values
    M = tab.build(fr)
    x = fr.map(rule.points)
    P = _eval_target(target, x, fr)
    nc, T = M.shape[:2]
    S = tabulate(tab.polys, rule.points)[:, tab.poly]
    Z = np.einsum("ctk,cqk->ctq", M.reshape(nc, T, -1), P.reshape(nc, x.shape[1], -1))
    F = np.einsum("ctq,qt->ct", Z, S * rule.weights[:, None]) * fr.measure[:, None]
    return segment_sum(F, tab.func, elem.dim, axis=1)


# --------------------------------------------------------------------------
# Sparse accumulation and static condensation


class _Accumulator:
    def __init__(self, n, flush=4_000_000):
        self.n, self.flush = n, flush
        self.rows, self.cols, self.vals = [], [], []
        self.count = 0
        self.A = sp.csr_matrix((n, n))

    def add(self, dofs, loc):
        nl = dofs.shape[1]
        self.rows.append(np.repeat(dofs, nl, axis=1).ravel().astype(np.int32))
        self.cols.append(np.tile(dofs, (1, nl)).ravel().astype(np.int32))
        self.vals.append(loc.ravel())
        self.count += loc.size
        if self.count >= self.flush:
            self._merge()

    def _merge(self):
        if self.rows:
            r, c, v = (np.concatenate(x) for x in (self.rows, self.cols, self.vals))
            self.A = self.A + sp.csr_matrix((v, (r, c)), shape=(self.n, self.n))
            self.rows, self.cols, self.vals, self.count = [], [], [], 0

    def result(self):
        self._merge()
        A = self.A.tocsr()
        A.sum_duplicates()
        A.sort_indices()
        return A


@dataclass
class Condensation:
    """Per-cell data to recover condensed cell-private unknowns."""

    private_dofs: np.ndarray
    shared_dofs: np.ndarray
    solve_shared: np.ndarray
    solve_rhs: np.ndarray


def _condense(A, b, private):
    shared = ~private
    Acc = A[:, private][:, :, private]
    Acs = A[:, private][:, :, shared]
    Ass = A[:, shared][:, :, shared]
    Y = np.linalg.solve(Acc, np.concatenate([Acs, b[:, private, None]], axis=2))
    Ya, yb = Y[:, :, :-1], Y[:, :, -1]
    Asc = np.swapaxes(Acs, 1, 2)
    S = Ass - Asc @ Ya
    bs = b[:, shared] - np.einsum("cij,cj->ci", Asc, yb)
    return S, bs, Ya, yb


@dataclass
class CsrSystem:
    """Symmetric sparse system over the kept (non-condensed) unknowns.

    ``keep`` maps system unknowns to the full dof vector of length
    ``n_full``; ``fixed``/``fixed_values`` hold essential constraints.
    """

    A: sp.csr_matrix
    b: np.ndarray
    n_full: int
    keep: np.ndarray
    condensation: Condensation = None
    fixed: np.ndarray = None
    fixed_values: np.ndarray = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.A.shape[0]

    def expand(self, x_sys):
        x = np.zeros(self.n_full)
        x[self.keep] = x_sys
        c = self.condensation
        if c is not None:
            xs = x[c.shared_dofs]
            x_priv = c.solve_rhs - np.einsum("cij,cj->ci", c.solve_shared, xs)
            x[c.private_dofs] = x_priv
        return x


def _assemble(n_full, nloc, private_mask, cell_dofs, local_fn, n_cells, per_cell, condense):
    """Drive chunked local computation, optional condensation and scatter."""
    if condense and np.any(private_mask):
        keep_mask = np.ones(n_full, dtype=bool)
        keep_mask[np.unique(cell_dofs[:, private_mask])] = False
    else:
        keep_mask = np.ones(n_full, dtype=bool)
        condense = False
    keep = np.flatnonzero(keep_mask)
    sys_index = -np.ones(n_full, dtype=np.int64)
    sys_index[keep] = np.arange(len(keep))
    acc = _Accumulator(len(keep))
    b = np.zeros(len(keep))
    Ya_all, yb_all = [], []
    for cells in _chunks(n_cells, per_cell):
        A_loc, b_loc = local_fn(cells)
        dofs = cell_dofs[cells]
        if condense:
            S, bs, Ya, yb = _condense(A_loc, b_loc, private_mask)
            Ya_all.append(Ya)
            yb_all.append(yb)
            A_loc, b_loc, dofs = S, bs, dofs[:, ~private_mask]
        sd = sys_index[dofs]
        acc.add(sd, A_loc)
        np.add.at(b, sd.ravel(), b_loc.ravel())
    cond = None
    if condense:
        cond = Condensation(cell_dofs[:, private_mask], cell_dofs[:, ~private_mask],
                            np.concatenate(Ya_all), np.concatenate(yb_all))
    return CsrSystem(acc.result(), b, n_full, keep, cond)


# --------------------------------------------------------------------------
# Quasi-projection


def assemble_projection(mesh, elem, target=None, condense=False, dofmap=None, load_degree=None):
    """System of  int <dP, P> + <symCurl dP, symCurl P> = int <dP, target>."""
    dm = dofmap or build_dofmap(mesh, elem)
    V, C = elem.values, elem.symcurl
    rule = cell_rule(mesh.cell_type, load_degree or elem.degree + 8)
    if target is not None:
        _check_resolved(mesh, target)
    per_cell = max(V.n_terms ** 2, C.n_terms ** 2) * 3 + len(rule) * V.n_terms * 9

    def local(cells):
        fr = CellFrame.from_mesh(mesh, cells)
        Mv, Mc = V.build(fr), C.build(fr)
        A = local_form(V, Mv, V, Mv, fr.measure, gram_frob, mesh.cell_type)
        A += local_form(C, Mc, C, Mc, fr.measure, gram_frob, mesh.cell_type)
        if target is None:
            return A, np.zeros(A.shape[:2])
        return A, local_load(elem, fr, target, rule)

    private = dm.is_cell[dm.cell_dofs[0]] if mesh.n_cells else np.zeros(0, bool)
    sys = _assemble(dm.n_dofs, elem.dim, private, dm.cell_dofs, local, mesh.n_cells,
                    per_cell, condense)
    sys.meta.update(element=elem.kind, dofmap=dm)
    return sys


# --------------------------------------------------------------------------
# Field evaluation and errors


def evaluate_field(mesh, elem, dofmap, coeffs, ref_pts, cells=None, table="values"):
    """Field values at reference points of the given cells."""
    cells = np.arange(mesh.n_cells) if cells is None else np.asarray(cells)
    fr = CellFrame.from_mesh(mesh, cells)
    tab = getattr(elem, table)
    M = tab.build(fr)
    S = tabulate(tab.polys, ref_pts)
    u = coeffs[dofmap.cell_dofs[cells]][:, tab.func]
    if S.ndim == 2:
        return np.einsum("ct,qt,ct...->cq...", u, S[:, tab.poly], M)
    return np.einsum("ct,cqt,ct...->cq...", u, S[:, :, tab.poly], M)


def l2_error(mesh, elem, dofmap, coeffs, target, degree=None, relative=True):
    """(Relative) L2 error of a discrete field against ``target``."""
    rule = cell_rule(mesh.cell_type, degree or elem.degree + 8)
    _check_resolved(mesh, target)
    err2 = ref2 = 0.0
    per_cell = len(rule) * elem.values.n_terms * 9
    for cells in _chunks(mesh.n_cells, per_cell):
        fr = CellFrame.from_mesh(mesh, cells)
        Ph = evaluate_field(mesh, elem, dofmap, coeffs, rule.points, cells)
        P = _eval_target(target, fr.map(rule.points), fr)
        w = rule.weights[None, :] * fr.measure[:, None]
        err2 += np.sum(w * np.sum((P - Ph) ** 2, axis=(-2, -1)))
        ref2 += np.sum(w * np.sum(P ** 2, axis=(-2, -1)))
    if not relative:
        return float(np.sqrt(err2))
    return float(np.sqrt(err2 / ref2)) if ref2 > 0 else float(np.sqrt(err2))


# --------------------------------------------------------------------------
# Essential boundary conditions


def _face_local_index(mesh, faces, cells):
    lf = np.argmax(mesh.cell_faces[cells] == faces[:, None], axis=1)
    return lf


def fit_boundary_trace(mesh, elem, dofmap, target, sides=None, degree=None):
    """L2(boundary) least-squares fit of the trace of ``target``.

    Vector elements fit the value; matrix elements fit the tangential
    trace ``P Anti(n)^T``.  Only boundary-associated non-identity dofs are
    fitted.  Returns ``(dofs, values)``.
    """
    if mesh.cell_type != "tet":
        raise NotImplementedError("boundary fitting is implemented for tetrahedral meshes")
    bf = mesh.boundary_faces(sides)
    cells = mesh.face_cells[bf, 0]
    rule = tri_rule(degree or 2 * elem.degree + 2)
    Fv = mesh.vertices[mesh.faces[bf]]
    e1, e2 = Fv[:, 1] - Fv[:, 0], Fv[:, 2] - Fv[:, 0]
    nrm = np.cross(e1, e2)
    area2 = np.linalg.norm(nrm, axis=1)
    unit_n = nrm / area2[:, None]
    s, t = rule.points[:, 0], rule.points[:, 1]
    x = Fv[:, None, 0] + s[None, :, None] * e1[:, None] + t[None, :, None] * e2[:, None]
    fr = CellFrame.from_mesh(mesh, cells)
    xi = np.einsum("cij,cqj->cqi", fr.Jinv, x - fr.X[:, None, 0])
    vals = elem.evaluate(fr, xi)
    tgt = np.asarray(target(x), dtype=float)
    if elem.rank == 2:
        AnT = np.swapaxes(t3.anti(unit_n), -1, -2)[:, None]
        vals = vals @ AnT[:, :, None]
        tgt = tgt @ AnT
    nf = len(bf)
    vflat = vals.reshape(nf, len(rule), elem.dim, -1)
    tflat = tgt.reshape(nf, len(rule), -1)
    w = rule.weights[None, :] * area2[:, None]
    dofs = dofmap.cell_dofs[cells]
    mask = dofmap.on_boundary[dofs]
    vflat = vflat * mask[:, None, :, None]
    Mloc = np.einsum("cq,cqik,cqjk->cij", w, vflat, vflat)
    bloc = np.einsum("cq,cqik,cqk->ci", w, vflat, tflat)
    bdofs = np.unique(dofs[mask])
    index = -np.ones(dofmap.n_dofs, dtype=np.int64)
    index[bdofs] = np.arange(len(bdofs))
    loc = np.where(mask, index[dofs], 0)
    Mloc = Mloc * (mask[:, :, None] & mask[:, None, :])
    bloc = bloc * mask
    n = len(bdofs)
    acc = _Accumulator(n)
    acc.add(loc, Mloc)
    M = acc.result()
    rhs = np.zeros(n)
    np.add.at(rhs, loc.ravel(), bloc.ravel())
    diag = M.diagonal()
    if n and np.min(diag) <= 1e-14 * np.max(diag):
        raise SingularMatrixError("boundary trace mass matrix is singular for this element")
    if n <= 2000:
        vals_b = dense_solve(M.toarray(), rhs)
    else:
        vals_b = cg_solve(M, rhs, rel_tol=1e-13, preconditioner="jacobi")[0]
    return bdofs, vals_b


# scalar trace degree of the shared (H(Curl)) part of each element
_TRACE_DEGREE = {"NI0": 0, "Y0": 0, "S0": 0, "NII1": 1, "Y1": 1, "S1": 1}


def identity_trace_modes(mesh, elem, dofmap, dofs, sides=None):
    """Boundary dof vectors whose tangential trace is ``q 𝟙 Anti(n)^T``.

    These are exactly the traces with vanishing symmetric part.  ``q`` runs
    over constants (lowest-order Nedelec based elements) or the continuous
    piecewise linear hat functions of the boundary vertices (linear ones).
    Each trace is fitted face by face, which is exact because the traces
    are representable; rows are aligned with ``dofs``.
    """
    if elem.kind not in _TRACE_DEGREE:
        raise NotImplementedError(f"identity trace modes are not available for {elem.kind}")
    deg = _TRACE_DEGREE[elem.kind]
    bf = mesh.boundary_faces(sides)
    cells = mesh.face_cells[bf, 0]
    rule = tri_rule(2 * elem.degree + 2)
    Fv = mesh.vertices[mesh.faces[bf]]
    e1, e2 = Fv[:, 1] - Fv[:, 0], Fv[:, 2] - Fv[:, 0]
    nrm = np.cross(e1, e2)
    area2 = np.linalg.norm(nrm, axis=1)
    AnT = np.swapaxes(t3.anti(nrm / area2[:, None]), -1, -2)
    s, t = rule.points[:, 0], rule.points[:, 1]
    x = Fv[:, None, 0] + s[None, :, None] * e1[:, None] + t[None, :, None] * e2[:, None]
    fr = CellFrame.from_mesh(mesh, cells)
    xi = np.einsum("cij,cqj->cqi", fr.Jinv, x - fr.X[:, None, 0])
    tr = (elem.evaluate(fr, xi) @ AnT[:, None, None]).reshape(len(bf), len(rule), elem.dim, 9)
    w = rule.weights[None, :] * area2[:, None]
    M = np.einsum("cq,cqik,cqjk->cij", w, tr, tr)
    diag = np.einsum("cii->ci", M)
    mask = (diag > 1e-12 * diag.max(axis=1, keepdims=True))
    mask[:, elem.identity] = False
    M = np.where(mask[:, :, None] & mask[:, None, :], M, 0.0)
    M += np.einsum("ci,ij->cij", (~mask).astype(float), np.eye(elem.dim))
    Q = np.ones((len(rule), 1)) if deg == 0 else np.column_stack([1 - s - t, s, t])
    tq = np.einsum("qm,cqk->cqmk", Q, AnT.reshape(len(bf), 1, 9).repeat(len(rule), 1))
    rhs = np.einsum("cq,cqik,cqmk->cim", w, tr, tq) * mask[:, :, None]
    coef = np.linalg.solve(M, rhs)
    if deg == 0:
        mode_of = np.zeros((len(bf), 1), dtype=np.int64)
        n_modes = 1
    else:
        bverts, inv = np.unique(mesh.faces[bf], return_inverse=True)
        mode_of = inv.reshape(len(bf), 3)
        n_modes = len(bverts)
    gd = dofmap.cell_dofs[cells]
    rows, cols, vals = [], [], []
    for m in range(Q.shape[1]):
        sel = mask & (np.abs(coef[:, :, m]) > 1e-13)
        fidx, fn = np.nonzero(sel)
        rows.append(gd[fidx, fn])
        cols.append(mode_of[fidx, m])
        vals.append(coef[fidx, fn, m])
    rows, cols, vals = (np.concatenate(a) for a in (rows, cols, vals))
    pos = np.searchsorted(dofs, rows)
    if np.any(pos >= len(dofs)) or np.any(dofs[np.minimum(pos, len(dofs) - 1)] != rows):
        raise ValueError("identity trace modes touch dofs outside the constrained set")
    key = pos.astype(np.int64) * n_modes + cols
    order = np.argsort(key, kind="stable")
    key, vals = key[order], vals[order]
    first = np.r_[True, key[1:] != key[:-1]]
    grp = np.cumsum(first) - 1
    spread = np.zeros(first.sum())
    np.maximum.at(spread, grp, np.abs(vals - vals[first][grp]))
    if spread.size and spread.max() > 1e-8 * max(np.abs(vals).max(), 1.0):
        raise ValueError("identity trace is not representable by this element")
    key, vals = key[first], vals[first]
    return sp.csr_matrix((vals, (key // n_modes, key % n_modes)), shape=(len(dofs), n_modes))


@dataclass
class ConstrainedSystem:
    """Reduced system for ``x = x_fixed + T y`` with free unknowns ``y``."""

    A: sp.csr_matrix
    b: np.ndarray
    T: sp.csr_matrix
    x_fixed: np.ndarray
    parent: CsrSystem

    def expand(self, y):
        return self.parent.expand(self.x_fixed + self.T @ y)


def apply_essential_bc(system, dofs=(), values=(), modes=None):
    """Eliminate prescribed unknowns symmetrically.

    ``dofs`` index the full dof vector and must not be condensed.  Without
    ``modes`` they are fixed to ``values``.  With a (len(dofs), m) matrix
    ``modes`` they are restricted to the affine set ``values + modes @ c``
    and the m coefficients ``c`` become unknowns; the reduced matrix
    ``T^T A T`` stays symmetric.
    """
    dofs = np.asarray(dofs, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    sys_index = -np.ones(system.n_full, dtype=np.int64)
    sys_index[system.keep] = np.arange(system.n)
    idx = sys_index[dofs]
    if np.any(idx < 0):
        raise ValueError("essential constraint on a condensed cell dof")
    x = np.zeros(system.n)
    x[idx] = values
    fixed = np.zeros(system.n, dtype=bool)
    fixed[idx] = True
    free = np.flatnonzero(~fixed)
    nf = len(free)
    T = sp.csr_matrix((np.ones(nf), (free, np.arange(nf))), shape=(system.n, nf))
    if modes is not None and modes.shape[1]:
        Z = sp.coo_matrix(modes)
        Tz = sp.csr_matrix((Z.data, (idx[Z.row], Z.col)), shape=(system.n, Z.shape[1]))
        T = sp.hstack([T, Tz]).tocsr()
    A = system.A
    rhs = T.T @ (system.b - A @ x)
    if modes is None:
        A_red = A[free][:, free].tocsr()
    else:
        A_red = (T.T @ A @ T).tocsr()
        A_red.sort_indices()
    system.fixed, system.fixed_values = fixed, x[fixed]
    return ConstrainedSystem(A_red, rhs, T, x, system)


def solve(system, rel_tol=1e-10, max_iter=None, preconditioner="jacobi", info=None):
    """Solve a CsrSystem or ConstrainedSystem and return the full dof vector."""
    if isinstance(system, CsrSystem):
        system = apply_essential_bc(system)
    x, it, res = cg_solve(system.A, system.b, rel_tol=rel_tol, max_iter=max_iter,
                          preconditioner=preconditioner)
    if info is not None:
        info.update(iterations=it, residual=res, n=system.A.shape[0])
    return system.expand(x)


# --------------------------------------------------------------------------
# Relaxed micromorphic model


@dataclass(frozen=True)
class MaterialParams:
    mu_e: float
    lambda_e: float
    mu_micro: float
    lambda_micro: float
    mu_c: float = 0.0
    mu_macro: float = 1.0
    L_c: float = 1.0

    def __post_init__(self):
        if min(self.mu_e, self.mu_micro, self.mu_macro) <= 0:
            raise ValueError("shear moduli must be positive")
        if self.mu_c < 0 or self.L_c <= 0:
            raise ValueError("need mu_c >= 0 and L_c > 0")


def _cell_params(materials, cell_region, n_cells):
    if isinstance(materials, MaterialParams):
        materials = [materials]
    cell_region = np.zeros(n_cells, dtype=int) if cell_region is None else np.asarray(cell_region)
    if cell_region.shape != (n_cells,) or cell_region.min() < 0 or \
            cell_region.max() >= len(materials):
        raise ValueError("inconsistent region assignment")
    names = ("mu_e", "lambda_e", "mu_micro", "lambda_micro", "mu_c", "mu_macro", "L_c")
    table = np.array([[getattr(m, k) for k in names] for m in materials])
    return dict(zip(names, table[cell_region].T))


@dataclass
class RmmProblem:
    mesh: object
    u_elem: object
    p_elem: object
    u_dofs: DofMap
    p_dofs: DofMap
    params: dict

    @property
    def n_u(self):
        return self.u_dofs.n_dofs

    @property
    def n_full(self):
        return self.u_dofs.n_dofs + self.p_dofs.n_dofs

    def split(self, x):
        return x[:self.n_u], x[self.n_u:]


def assemble_rmm(mesh, u_elem, p_elem, materials, cell_region=None, body_force=None,
                 micro_moment=None, condense=False):
    """System from the first variation of the relaxed micromorphic energy."""
    ud, pd = build_dofmap(mesh, u_elem), build_dofmap(mesh, p_elem)
    prm = _cell_params(materials, cell_region, mesh.n_cells)
    prob = RmmProblem(mesh, u_elem, p_elem, ud, pd, prm)
    G, V, C = u_elem.gradient, p_elem.values, p_elem.symcurl
    has_c = np.any(prm["mu_c"] > 0)
    nu, np_ = u_elem.dim, p_elem.dim
    rule = cell_rule(mesh.cell_type, max(u_elem.degree, p_elem.degree) + 4)
    loads = body_force is not None or micro_moment is not None
    per_cell = 3 * max(G.n_terms, V.n_terms, C.n_terms) ** 2
    ct = mesh.cell_type

    def local(cells):
        fr = CellFrame.from_mesh(mesh, cells)
        p = {k: v[cells] for k, v in prm.items()}
        Mg, Mv, Mc = G.build(fr), V.build(fr), C.build(fr)
        ce = gram_isotropic(p["mu_e"], p["lambda_e"])
        ctot = gram_isotropic(p["mu_e"] + p["mu_micro"], p["lambda_e"] + p["lambda_micro"])
        m = fr.measure
        uu = local_form(G, Mg, G, Mg, m, ce, ct)
        up = -local_form(G, Mg, V, Mv, m, ce, ct)
        pp = local_form(V, Mv, V, Mv, m, ctot, ct)
        if has_c:
            cc = gram_skew(p["mu_c"])
            uu += local_form(G, Mg, G, Mg, m, cc, ct)
            up -= local_form(G, Mg, V, Mv, m, cc, ct)
            pp += local_form(V, Mv, V, Mv, m, cc, ct)
        pp += local_form(C, Mc, C, Mc, m * p["mu_macro"] * p["L_c"] ** 2, gram_frob, ct)
        A = np.empty((len(cells), nu + np_, nu + np_))
        A[:, :nu, :nu] = uu
        A[:, :nu, nu:] = up
        A[:, nu:, :nu] = np.swapaxes(up, 1, 2)
        A[:, nu:, nu:] = pp
        b = np.zeros((len(cells), nu + np_))
        if loads:
            if body_force is not None:
                b[:, :nu] = _vector_load(u_elem, fr, body_force, rule)
            if micro_moment is not None:
                b[:, nu:] = local_load(p_elem, fr, micro_moment, rule)
        return A, b

    cell_dofs = np.concatenate([ud.cell_dofs, pd.cell_dofs + ud.n_dofs], axis=1)
    private = np.concatenate([ud.is_cell[ud.cell_dofs[0]], pd.is_cell[pd.cell_dofs[0]]])
    sys = _assemble(prob.n_full, nu + np_, private, cell_dofs, local, mesh.n_cells, per_cell,
                    condense)
    sys.meta.update(problem=prob)
    return sys


def _vector_load(elem, fr, force, rule):
    tab = elem.values
    v = tab.build(fr)
    x = fr.map(rule.points)
    f = _eval_target(force, x, fr)
    S = tabulate(tab.polys, rule.points)[:, tab.poly]
    F = np.einsum("cti,cqi,qt,q->ct", v, f, S, rule.weights) * fr.measure[:, None]
    return segment_sum(F, tab.func, elem.dim, axis=1)


def rmm_constraints(problem, u_target, grad_target, p_mode):
    """Essential data for the relaxed micromorphic problem.

    u is prescribed on the whole boundary.  For P:

    * ``'coupling'`` and ``'dirichlet'``: the tangential trace
      ``grad_target Anti(n)^T`` is fitted on the boundary dofs of the
      H(Curl)-conforming block.  Cell identity dofs are never constrained, so
      for the Y/S families the identity part stays free; for Nedelec elements
      this is the full tangential Dirichlet condition.
    * ``'sym-coupling'``: as ``'coupling'``, but the boundary traces with
      vanishing symmetric part (``q 𝟙 Anti(n)^T``, see
      :func:`identity_trace_modes`) are released, so only
      sym(P Anti(n)^T) = sym(D u Anti(n)^T) is enforced.
    * ``'neumann'``: P is free on the boundary.

    Returns ``(dofs, values, modes)`` for :func:`apply_essential_bc`.
    """
    mesh = problem.mesh
    udofs, uvals = fit_boundary_trace(mesh, problem.u_elem, problem.u_dofs, u_target)
    if p_mode == "neumann":
        return udofs, uvals, None
    if p_mode not in ("coupling", "dirichlet", "sym-coupling"):
        raise ValueError(f"unknown boundary mode {p_mode!r}")
    pdofs, pvals = fit_boundary_trace(mesh, problem.p_elem, problem.p_dofs, grad_target)
    dofs = np.concatenate([udofs, pdofs + problem.n_u])
    vals = np.concatenate([uvals, pvals])
    if p_mode != "sym-coupling":
        return dofs, vals, None
    Zp = identity_trace_modes(mesh, problem.p_elem, problem.p_dofs, pdofs)
    modes = sp.vstack([sp.csr_matrix((len(udofs), Zp.shape[1])), Zp]).tocsr()
    return dofs, vals, modes


def energy(problem, x, degree=None):
    """Stored energy (no load terms) of the state ``x`` by quadrature."""
    mesh = problem.mesh
    u, P = problem.split(x)
    rule = cell_rule(mesh.cell_type, degree or 2 * max(problem.u_elem.degree,
                                                       problem.p_elem.degree) + 2)
    total = 0.0
    prm = problem.params
    per_cell = len(rule) * 9 * max(problem.p_elem.symcurl.n_terms, 1)
    for cells in _chunks(mesh.n_cells, per_cell):
        fr = CellFrame.from_mesh(mesh, cells)
        Du = evaluate_field(mesh, problem.u_elem, problem.u_dofs, u, rule.points, cells,
                            "gradient")
        Pv = evaluate_field(mesh, problem.p_elem, problem.p_dofs, P, rule.points, cells)
        Pc = evaluate_field(mesh, problem.p_elem, problem.p_dofs, P, rule.points, cells,
                            "symcurl")
        p = {k: v[cells][:, None] for k, v in prm.items()}
        e = Du - Pv
        se, sp_ = t3.sym(e), t3.sym(Pv)
        dens = (2 * p["mu_e"] * t3.frob(se, se) + p["lambda_e"] * t3.trace(se) ** 2
                + 2 * p["mu_micro"] * t3.frob(sp_, sp_) + p["lambda_micro"] * t3.trace(sp_) ** 2
                + 2 * p["mu_c"] * t3.frob(t3.skw(e), t3.skw(e))
                + p["mu_macro"] * p["L_c"] ** 2 * t3.frob(Pc, Pc))
        total += 0.5 * np.sum(dens * rule.weights[None, :] * fr.measure[:, None])
    return float(total)
