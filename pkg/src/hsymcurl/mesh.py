"""Structured box meshes (Kuhn tetrahedra or cuboids) and affine maps.

Cells are stored positively oriented.  Shape functions are built on the
*canonical* vertex order of each tetrahedron, i.e. its vertex ids sorted
ascending; every local edge and face of that order then runs in the
global direction (ascending ids), so shared polytopes agree between
neighbours without any sign bookkeeping.

Reference tetrahedron vertices, in local order::

    v0 = (0, 0, 0), v1 = (0, 0, 1), v2 = (0, 1, 0), v3 = (1, 0, 0)

with barycentrics l0 = 1 - xi - eta - zeta, l1 = zeta, l2 = eta, l3 = xi.
Reference cube vertices follow the usual VTK hexahedron order.
"""
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

TET_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
TET_FACES = ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
TET_REF_VERTICES = np.array([[0.0, 0, 0], [0, 0, 1], [0, 1, 0], [1, 0, 0]])

HEX_REF_VERTICES = np.array(
    [[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
     [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]]
)
HEX_EDGES = ((0, 1), (1, 2), (2, 3), (0, 3), (0, 4), (1, 5),
             (2, 6), (3, 7), (4, 5), (5, 6), (6, 7), (7, 4))
HEX_FACES = ((0, 1, 2, 3), (4, 5, 6, 7), (0, 1, 5, 4),
             (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7))

SIDE_NAMES = ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")
INTERIOR = -1
INTERFACE = 6


class DegenerateCellError(ValueError):
    pass


@dataclass
class Mesh:
    """Conforming box mesh with global edge/face tables.

    ``cell_edges``/``cell_faces`` index the local polytopes of the
    canonical vertex order (``TET_EDGES``/``TET_FACES`` for tets,
    ``HEX_EDGES``/``HEX_FACES`` for hexes).  ``face_markers`` holds the
    side id 0..5 for boundary facets, ``INTERFACE`` for interior facets on
    a requested interface plane and ``INTERIOR`` otherwise.
    """

    vertices: np.ndarray
    cells: np.ndarray
    cell_type: str
    edges: np.ndarray = field(default=None)
    faces: np.ndarray = field(default=None)
    cell_edges: np.ndarray = field(default=None)
    cell_faces: np.ndarray = field(default=None)
    cell_edge_signs: np.ndarray = field(default=None)
    face_cells: np.ndarray = field(default=None)
    face_markers: np.ndarray = field(default=None)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def canonical_cells(self):
        if self.cell_type == "tet":
            return np.sort(self.cells, axis=1)
        return self.cells

    def entity_counts(self):
        return (self.n_vertices, self.n_edges, self.n_faces, self.n_cells)

    def boundary_faces(self, sides=None):
        mk = self.face_markers
        if sides is None:
            return np.flatnonzero((mk >= 0) & (mk < 6))
        return np.flatnonzero(np.isin(mk, list(sides)))

    def centroids(self):
        return self.vertices[self.cells].mean(axis=1)

    def cell_volumes(self):
        maps = affine_maps(self, canonical=False)
        return np.abs(maps.detJ) * (1.0 / 6.0 if self.cell_type == "tet" else 1.0)


def _grid(bounds, divisions):
    bounds = np.asarray(bounds, dtype=float).reshape(3, 2)
    divisions = tuple(int(d) for d in divisions)
    if len(divisions) != 3 or min(divisions) < 1:
        raise ValueError("divisions must be three positive counts")
    if np.any(bounds[:, 1] - bounds[:, 0] <= 0):
        raise ValueError("zero-length or inverted interval in bounds")
    axes = [np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(bounds, divisions)]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    verts = np.column_stack([X.ravel(order="F"), Y.ravel(order="F"), Z.ravel(order="F")])
    nx, ny, nz = divisions

    def vid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    I, J, K = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    I, J, K = I.ravel(order="F"), J.ravel(order="F"), K.ravel(order="F")
    return bounds, verts, vid, (I, J, K)


def box_tet_mesh(bounds, divisions, interfaces=()):
    """Kuhn mesh of a box: each cuboid split into 6 tets on its main diagonal.

    ``interfaces`` is a sequence of ``(axis, value)`` planes whose interior
    facets get the ``INTERFACE`` marker.
    """
    bounds, verts, vid, (I, J, K) = _grid(bounds, divisions)
    unit = np.eye(3, dtype=int)
    tets = []
    for perm in permutations(range(3)):
        path = [np.zeros(3, dtype=int)]
        for ax in perm:
            path.append(path[-1] + unit[ax])
        tets.append(np.column_stack([vid(I + p[0], J + p[1], K + p[2]) for p in path]))
    cells = np.stack(tets, axis=1).reshape(-1, 4)
    cells = _orient_positive(verts, cells)
    mesh = Mesh(verts, cells, "tet")
    enumerate_polytopes(mesh, bounds, interfaces)
    return mesh


def box_hex_mesh(bounds, divisions, interfaces=()):
    bounds, verts, vid, (I, J, K) = _grid(bounds, divisions)
    cells = np.column_stack(
        [vid(I + int(p[0]), J + int(p[1]), K + int(p[2])) for p in HEX_REF_VERTICES]
    )
    mesh = Mesh(verts, cells, "hex")
    enumerate_polytopes(mesh, bounds, interfaces)
    return mesh


def _tet_jacobians(X):
    return np.stack([X[..., 3, :] - X[..., 0, :], X[..., 2, :] - X[..., 0, :],
                     X[..., 1, :] - X[..., 0, :]], axis=-1)


def _orient_positive(verts, cells):
    det = np.linalg.det(_tet_jacobians(verts[cells]))
    cells = cells.copy()
    flip = det < 0
    cells[flip, 2], cells[flip, 3] = cells[flip, 3].copy(), cells[flip, 2].copy()
    return cells


def _unique_rows(rows):
    uniq, inv = np.unique(rows, axis=0, return_inverse=True)
    return uniq, inv.reshape(-1)


def enumerate_polytopes(mesh, bounds=None, interfaces=()):
    """Fill the global edge/face tables and boundary markers of ``mesh``."""
    if mesh.cell_type == "tet":
        local_edges, local_faces = TET_EDGES, TET_FACES
    else:
        local_edges, local_faces = HEX_EDGES, HEX_FACES
    canon = mesh.canonical_cells
    nc = len(canon)

    e_rows = np.sort(np.stack([canon[:, list(e)] for e in local_edges], axis=1), axis=2)
    edges, inv = _unique_rows(e_rows.reshape(-1, 2))
    mesh.edges = edges
    mesh.cell_edges = inv.reshape(nc, len(local_edges))
    stored = mesh.cells
    if mesh.cell_type == "tet":
        # orientation of each stored local edge relative to the global direction
        mesh.cell_edge_signs = np.stack(
            [np.where(stored[:, i] < stored[:, j], 1, -1) for i, j in TET_EDGES], axis=1)
    else:
        mesh.cell_edge_signs = np.stack(
            [np.where(stored[:, i] < stored[:, j], 1, -1) for i, j in HEX_EDGES], axis=1)

    f_rows = np.sort(np.stack([canon[:, list(f)] for f in local_faces], axis=1), axis=2)
    faces, inv = _unique_rows(f_rows.reshape(-1, f_rows.shape[2]))
    if mesh.cell_type == "hex":
        # keep hex faces as their cyclic vertex order for export, keyed by sorted ids
        cyc = np.stack([canon[:, list(f)] for f in local_faces], axis=1).reshape(-1, 4)
        order = np.empty(len(faces), dtype=int)
        order[inv] = np.arange(len(inv))
        faces = cyc[order]
    mesh.faces = faces
    mesh.cell_faces = inv.reshape(nc, len(local_faces))

    face_cells = -np.ones((len(faces), 2), dtype=int)
    cell_ids = np.repeat(np.arange(nc), len(local_faces))
    flat = mesh.cell_faces.reshape(-1)
    order = np.argsort(flat, kind="stable")
    f_sorted, c_sorted = flat[order], cell_ids[order]
    first = np.ones(len(f_sorted), dtype=bool)
    first[1:] = f_sorted[1:] != f_sorted[:-1]
    face_cells[f_sorted[first], 0] = c_sorted[first]
    face_cells[f_sorted[~first], 1] = c_sorted[~first]
    counts = np.bincount(flat, minlength=len(faces))
    if np.any(counts > 2):
        raise ValueError("non-manifold mesh: facet shared by more than two cells")
    mesh.face_cells = face_cells

    markers = np.full(len(faces), INTERIOR, dtype=int)
    fx = mesh.vertices[faces]
    tol = 1e-10
    if bounds is None:
        lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    else:
        lo, hi = np.asarray(bounds)[:, 0], np.asarray(bounds)[:, 1]
    boundary = face_cells[:, 1] < 0
    for side in range(6):
        axis, val = side // 2, (lo, hi)[side % 2][side // 2]
        on = boundary & np.all(np.abs(fx[:, :, axis] - val) < tol, axis=1)
        markers[on] = side
    for axis, val in interfaces:
        on = ~boundary & np.all(np.abs(fx[:, :, axis] - val) < tol, axis=1)
        markers[on] = INTERFACE
    mesh.face_markers = markers
    return mesh


@dataclass(frozen=True)
class ElementMap:
    """Affine map ``x = offset + J xi`` (single cell or batched)."""

    offset: np.ndarray
    J: np.ndarray
    detJ: np.ndarray
    Jinv: np.ndarray
    JinvT: np.ndarray

    def __call__(self, xi):
        return self.offset[..., None, :] + np.einsum("...ij,...qj->...qi", self.J, xi)

    def pullback(self, x):
        return np.einsum("...ij,...qj->...qi", self.Jinv, x - self.offset[..., None, :])


def _map_from_vertices(X, cell_type, check_positive):
    if cell_type == "tet":
        J = _tet_jacobians(X)
    else:
        J = np.zeros(X.shape[:-2] + (3, 3))
        diag = X[..., 6, :] - X[..., 0, :]
        idx = np.arange(3)
        J[..., idx, idx] = diag
        mapped = X[..., :1, :] + HEX_REF_VERTICES * diag[..., None, :]
        if np.any(np.abs(mapped - X) > 1e-12 * np.max(np.abs(X) + 1.0)):
            raise DegenerateCellError("hexahedral cells must be axis-aligned cuboids")
    det = np.linalg.det(J)
    if check_positive and np.any(det <= 0):
        raise DegenerateCellError("cell with non-positive Jacobian determinant")
    if np.any(np.abs(det) <= 1e-14 * np.max(np.abs(J)) ** 3):
        raise DegenerateCellError("degenerate cell")
    Jinv = np.linalg.inv(J)
    return ElementMap(X[..., 0, :].copy(), J, det, Jinv, np.swapaxes(Jinv, -1, -2))


def element_map(mesh, cell):
    """Positively oriented affine map of one cell in stored vertex order."""
    X = mesh.vertices[mesh.cells[cell]]
    return _map_from_vertices(X, mesh.cell_type, check_positive=True)


def affine_maps(mesh, cells=None, canonical=True):
    """Batched maps; the canonical order may reverse orientation."""
    table = mesh.canonical_cells if canonical else mesh.cells
    if cells is not None:
        table = table[cells]
    return _map_from_vertices(mesh.vertices[table], mesh.cell_type, check_positive=not canonical)


_VTK_TYPE = {"tet": 10, "hex": 12}


def write_vtk(path, mesh, cell_data=None, point_data=None, title="hsymcurl"):
    """Write a legacy ASCII VTK unstructured grid."""
    cell_data = cell_data or {}
    point_data = point_data or {}
    nv, nc = mesh.n_vertices, mesh.n_cells
    k = mesh.cells.shape[1]
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nv} double"]
    lines += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    lines.append(f"CELLS {nc} {nc * (k + 1)}")
    lines += [f"{k} " + " ".join(str(int(i)) for i in c) for c in mesh.cells]
    lines.append(f"CELL_TYPES {nc}")
    lines += [str(_VTK_TYPE[mesh.cell_type])] * nc

    def block(data, n):
        out = []
        for name, values in data.items():
            values = np.asarray(values, dtype=float)
            if values.shape[0] != n:
                raise ValueError(f"field {name!r} has wrong length")
            if values.ndim == 1:
                out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                out += [repr(float(v)) for v in values]
            elif values.shape[1:] == (3,):
                out.append(f"VECTORS {name} double")
                out += [" ".join(repr(float(c)) for c in v) for v in values]
            else:
                out.append(f"TENSORS {name} double")
                for T in values.reshape(n, 3, 3):
                    out += [" ".join(repr(float(c)) for c in row) for row in T]
        return out

    if cell_data:
        lines.append(f"CELL_DATA {nc}")
        lines += block(cell_data, nc)
    if point_data:
        lines.append(f"POINT_DATA {nv}")
        lines += block(point_data, nv)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
