"""Numerical checks of the discrete relaxed micromorphic sequences.

All checks tabulate functions at a quadrature rule on one cell, weight by
the square roots of the weights and scale each function to unit L2 norm,
so that ranks of the resulting matrices are ranks in L2.
"""
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor3 as t3
from .elements import (CellFrame, get_element, reference_frame, vector_h1)
from .polynomial import Poly, tabulate
from .quadrature import cell_rule

RANK_TOL = 1e-9

# polynomial degree of identity fields contained in each element family
_IDENTITY_DEGREE = {"Y0": 1, "S0": 2, "Y1": 2, "S1": 3, "Y2": 3, "M2": 2, "Y3": 4, "M3": 3}
_ORDER = {"Y0": 0, "S0": 0, "Y1": 1, "S1": 1, "Y2": 2, "M2": 2, "Y3": 3, "M3": 3}


@dataclass
class Tabulation:
    """Functions sampled on a rule: ``data`` is (nfuncs, npts, ...)."""

    data: np.ndarray
    weights: np.ndarray

    def matrix(self, normalise=True):
        w = np.sqrt(self.weights)
        M = (self.data * w.reshape((1, -1) + (1,) * (self.data.ndim - 2))).reshape(
            len(self.data), -1)
        if normalise:
            nrm = np.linalg.norm(M, axis=1)
            M = M / np.where(nrm > 0, nrm, 1.0)[:, None]
        return M


def numerical_rank(M, tol=RANK_TOL):
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * s[0])) if s[0] > 0 else 0


def _frame(elem, frame):
    return frame if frame is not None else reference_frame(elem.cell_type)


def _rule(elem, frame, degree=None):
    return cell_rule(elem.cell_type, degree or min(2 * elem.degree + 6, 20))


def tabulate_element(elem, table="values", frame=None, degree=None):
    fr = _frame(elem, frame)
    rule = _rule(elem, fr, degree)
    vals = elem.evaluate(fr, rule.points, table)[0]
    return Tabulation(np.moveaxis(vals, 1, 0), rule.weights * fr.measure[0])


def symcurl_rank(elem, frame=None, tol=RANK_TOL):
    """(rank, kernel dimension) of sym Curl on one cell.

    The sym Curl of every function is divided by the function's L2 norm
    before the SVD, so the split does not depend on basis scaling.
    """
    vals = tabulate_element(elem, frame=frame)
    curl = tabulate_element(elem, "symcurl", frame=frame)
    norms = np.linalg.norm(vals.matrix(normalise=False), axis=1)
    C = curl.matrix(normalise=False) / norms[:, None]
    r = numerical_rank(C, tol)
    return r, elem.dim - r


def subspace_inclusion(A, B):
    """Largest relative L2 residual of projecting the rows of A onto span(B)."""
    A = np.atleast_2d(A)
    coef, *_ = np.linalg.lstsq(B.T, A.T, rcond=None)
    res = np.linalg.norm(A.T - B.T @ coef, axis=0)
    return float(np.max(res / np.maximum(np.linalg.norm(A, axis=1), 1e-300)))


def intersection_dim(A, B, tol=RANK_TOL):
    """dim(span A ∩ span B) = rank A + rank B − rank [A; B]."""
    return numerical_rank(A, tol) + numerical_rank(B, tol) - numerical_rank(np.vstack([A, B]), tol)


def dev_gradients(p, frame=None, degree=12, drop_linear=False):
    """dev D of [U^p]^3 (optionally without the vertex, i.e. P1, functions)."""
    U = vector_h1(p)
    fr = _frame(U, frame)
    rule = cell_rule("tet", degree)
    g = np.moveaxis(U.evaluate(fr, rule.points, "gradient")[0], 1, 0)
    if drop_linear:
        g = g[[i for i, (d, _, _) in enumerate(U.assoc) if d > 0]]
    return Tabulation(t3.dev(g), rule.weights * fr.measure[0])


def full_gradients(p, frame=None, degree=12):
    U = vector_h1(p)
    fr = _frame(U, frame)
    rule = cell_rule("tet", degree)
    g = np.moveaxis(U.evaluate(fr, rule.points, "gradient")[0], 1, 0)
    return Tabulation(g, rule.weights * fr.measure[0])


def identity_fields(deg, frame=None, degree=12, cell_type="tet", homogeneous=False):
    """q 𝟙 for all monomials q in physical coordinates of total degree <= deg."""
    fr = frame if frame is not None else reference_frame(cell_type)
    rule = cell_rule(cell_type, degree)
    x = fr.map(rule.points)[0]
    monos = [(i, j, k) for i in range(deg + 1) for j in range(deg + 1) for k in range(deg + 1)
             if (i + j + k == deg if homogeneous else i + j + k <= deg)]
    S = tabulate([Poly({m: 1.0}) for m in monos], x)
    return Tabulation(np.einsum("qn,ij->nqij", S, np.eye(3)), rule.weights * fr.measure[0])


def element_tab(kind, frame=None, degree=12):
    e = get_element(kind) if isinstance(kind, str) else kind
    fr = _frame(e, frame)
    rule = cell_rule(e.cell_type, degree)
    vals = np.moveaxis(e.evaluate(fr, rule.points)[0], 1, 0)
    return Tabulation(vals, rule.weights * fr.measure[0])


def linear_dependence_lemma(frame=None):
    """Stack Y0 with dev D[U^2 minus P1]^3 and report (rank, stacked count)."""
    Y = element_tab("Y0", frame).matrix()
    D = dev_gradients(2, frame, drop_linear=True).matrix()
    S = np.vstack([Y, D])
    return numerical_rank(S), len(S)


def gradient_identity_intersection(p=2, frame=None, deg=2):
    """dim(D[P^p]^3 ∩ P^deg 𝟙): gradients that are pure identity fields."""
    G = full_gradients(p, frame).matrix()
    I = identity_fields(deg, frame).matrix()
    return intersection_dim(G, I)


@dataclass
class SequenceReport:
    element: str
    dim: int
    symcurl_rank: int
    kernel_dim: int
    predicted_kernel: int = None
    devgrad_inclusion: float = None
    identity_inclusion: float = None
    identity_symcurl: float = None
    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def to_json(self):
        d = asdict(self)
        d["passed"] = self.passed
        return json.dumps(d, indent=2)


def random_frame(seed=0):
    """A generic affine tetrahedron near the reference cell."""
    rng = np.random.default_rng(seed)
    X = np.array([[0.0, 0, 0], [0, 0, 1], [0, 1, 0], [1, 0, 0]]) + 0.2 * rng.standard_normal((4, 3))
    return CellFrame(X[None], "tet")


def sequence_report(kind, frame=None, tol=RANK_TOL):
    """Rank/kernel split of one element plus the kernel characterisation.

    For tetrahedral families with order p the kernel of sym Curl is
    predicted as (dev D[U^{p+2}]^3 ∩ span) ⊕ (identity polynomials ∩ span);
    the inclusions dev D[U^{p+1} minus P1]^3 ⊂ span and P^k 𝟙 ⊂ kernel are
    checked by least squares.
    """
    e = get_element(kind)
    r, k = symcurl_rank(e, frame, tol)
    rep = SequenceReport(kind, e.dim, r, k)
    rep.checks["rank_plus_kernel"] = r + k == e.dim
    if kind in _ORDER:
        p, deg = _ORDER[kind], _IDENTITY_DEGREE[kind]
        Y = element_tab(e, frame).matrix()
        if p + 1 >= 2:
            rep.devgrad_inclusion = subspace_inclusion(
                dev_gradients(p + 1, frame, drop_linear=True).matrix(), Y)
        else:
            rep.devgrad_inclusion = subspace_inclusion(dev_gradients(1, frame).matrix(), Y)
        Ik = identity_fields(deg, frame)
        rep.identity_inclusion = subspace_inclusion(Ik.matrix(), Y)
        kdev = intersection_dim(Y, dev_gradients(p + 2, frame).matrix(), tol)
        kid = intersection_dim(Y, identity_fields(deg + 1, frame).matrix(), tol)
        rep.predicted_kernel = kdev + kid
        rep.checks["devgrad_in_span"] = rep.devgrad_inclusion <= 1e-10
        rep.checks["identity_in_span"] = rep.identity_inclusion <= 1e-10
        rep.checks["kernel_matches_prediction"] = rep.predicted_kernel == k
    if e.rank == 2:
        curl = tabulate_element(e, "symcurl", frame=frame).data[e.identity]
        rep.identity_symcurl = float(np.max(np.abs(curl))) if curl.size else 0.0
        rep.checks["identity_block_in_kernel"] = rep.identity_symcurl <= 1e-12
    return rep


def facet_jumps(mesh, elem, n_points=8, sym_only=True, identity=True):
    """Largest facet jump of the tangential trace of every global basis function.

    Returns the max over interior faces and global functions of
    |[sym](P Anti(n)^T)|_left − (...)_right, relative to the largest trace.
    Vector elements compare values.  ``identity=False`` drops the cell
    identity functions.
    """
    from .assembly import build_dofmap
    from .quadrature import tri_rule

    dm = build_dofmap(mesh, elem)
    fi = np.flatnonzero(mesh.face_cells[:, 1] >= 0)
    if len(fi) == 0:
        return 0.0
    keep = np.ones(elem.dim, dtype=bool)
    if not identity:
        keep[elem.identity] = False
    F = mesh.vertices[mesh.faces[fi]]
    if mesh.cell_type == "tet":
        rule = tri_rule(n_points)
        e1, e2 = F[:, 1] - F[:, 0], F[:, 2] - F[:, 0]
        X = F[:, None, 0] + rule.points[None, :, 0, None] * e1[:, None] \
            + rule.points[None, :, 1, None] * e2[:, None]
    else:
        g = np.linspace(0.05, 0.95, 5)
        s, t = [a.ravel() for a in np.meshgrid(g, g)]
        e1, e2 = F[:, 1] - F[:, 0], F[:, 3] - F[:, 0]
        X = F[:, None, 0] + s[None, :, None] * e1[:, None] + t[None, :, None] * e2[:, None]
    n = np.cross(e1, e2)
    n /= np.linalg.norm(n, axis=1)[:, None]
    traces, dofs = [], []
    for side in (0, 1):
        c = mesh.face_cells[fi, side]
        fr = CellFrame.from_mesh(mesh, c)
        xi = np.einsum("cij,cqj->cqi", fr.Jinv, X - fr.X[:, None, 0])
        v = elem.evaluate(fr, xi)[:, :, keep]
        if elem.rank == 2:
            v = v @ np.swapaxes(t3.anti(n), -1, -2)[:, None, None]
            if sym_only:
                v = t3.sym(v)
        traces.append(v.reshape(v.shape[0], v.shape[1], v.shape[2], -1))
        dofs.append(dm.cell_dofs[c][:, keep])
    scale = max(np.abs(traces[0]).max(), 1e-300)
    worst = 0.0
    # scatter both sides onto global dofs per face: a function absent on one
    # side contributes a zero trace there
    for f in range(len(fi)):
        g0, g1 = dofs[0][f], dofs[1][f]
        glob = np.union1d(g0, g1)
        T = np.zeros((2, len(glob)) + traces[0].shape[1:2] + traces[0].shape[3:])
        T[0][np.searchsorted(glob, g0)] = np.moveaxis(traces[0][f], 1, 0)
        T[1][np.searchsorted(glob, g1)] += np.moveaxis(traces[1][f], 1, 0)
        worst = max(worst, float(np.abs(T[0] - T[1]).max()))
    return worst / scale


def hex_rho_traceless(frame=None):
    """Largest |tr(J ϱ J^{-1})| over the traceless vertex templates."""
    from .elements import SL3_BASIS
    fr = frame if frame is not None else reference_frame("hex")
    mats = [fr.J[0] @ r @ fr.Jinv[0] for r in SL3_BASIS]
    return float(max(abs(np.trace(m)) for m in mats))
