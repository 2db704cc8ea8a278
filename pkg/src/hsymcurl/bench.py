"""Regularity benchmarks, convergence rates and the two-material dilatation run."""
import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import assembly as asm
from . import tensor3 as t3
from .elements import get_element
from .mesh import box_tet_mesh, write_vtk
from .quadrature import cell_rule

CONVERGENCE_DOMAIN = ((-3.0, 3.0), (-1.0, 1.0), (-1.0, 1.0))
CONVERGENCE_BASE = (3, 1, 1)
DILATATION_DOMAIN = ((-2.0, 2.0),) * 3
DILATATION_BASE = (4, 4, 4)

CONVERGENCE_ELEMENTS = ("NI0", "NII1", "Y0", "S0", "Y1", "S1", "Y2", "M2", "L1", "D1")
MICRO_ELEMENTS = ("NI0", "NII1", "S0", "S1")
DISP_ELEMENTS = ("U1", "U2")
BC_MODES = ("coupling", "neumann", "dirichlet", "sym-coupling")


# --------------------------------------------------------------------------
# Target fields


def _e1_column():
    M = np.zeros((3, 3))
    M[:, 0] = 1.0
    return M


_COL = _e1_column()


def _b1(x, inside):
    out = np.zeros(x.shape[:-1] + (3, 3))
    out[..., 0, 0] = np.sinh(x[..., 0]) / 10.0
    return out


def _b2(x, inside):
    s = np.where(inside, np.cos(x[..., 0]), np.sin(x[..., 0]))
    return s[..., None, None] * _COL


def _b3(x, inside):
    a = np.sin(x[..., 0] + 2 * x[..., 1] - 3 * x[..., 2])
    return (np.where(inside, 2.0, 1.0) * a)[..., None, None] * np.eye(3)


def _b4(x, inside):
    return inside.astype(float)[..., None, None] * np.eye(3)


@dataclass(frozen=True)
class BenchmarkField:
    """Piecewise tensor field; the branch is |x| < 1 on the first coordinate.

    Called as ``field(x)`` or ``field(x, xc)``; with ``xc`` (cell centroids
    broadcast to the points) the branch is chosen per cell, which samples
    the correct side at points lying on the jump plane.
    """

    id: str
    description: str
    evaluator: object = field(repr=False)
    jump_planes: tuple = ()

    def __call__(self, x, xc=None):
        x = np.asarray(x, dtype=float)
        ref = x if xc is None else np.asarray(xc, dtype=float)
        return self.evaluator(x, np.abs(ref[..., 0]) < 1.0)


_PLANES = ((0, -1.0), (0, 1.0))
FIELDS = {
    "B1": BenchmarkField("B1", "smooth sinh(x)/10 e1(x)e1", _b1),
    "B2": BenchmarkField("B2", "jumping normal component", _b2, _PLANES),
    "B3": BenchmarkField("B3", "jumping smooth identity", _b3, _PLANES),
    "B4": BenchmarkField("B4", "jumping constant identity", _b4, _PLANES),
}


def eval_benchmark_field(fid, x):
    if fid not in FIELDS:
        raise ValueError(f"unknown field {fid!r}")
    return FIELDS[fid](x)


# --------------------------------------------------------------------------
# Convergence studies


def eoc(dofs, errors):
    """Rates 3 log(e_i/e_{i+1}) / log(N_{i+1}/N_i) with h ~ N^(-1/3)."""
    N, e = np.asarray(dofs, dtype=float), np.asarray(errors, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return list(3.0 * np.log(e[:-1] / e[1:]) / np.log(N[1:] / N[:-1]))


@dataclass
class ConvergenceLevel:
    level: int
    divisions: tuple
    cells: int
    dofs: int
    rel_l2_error: float
    iterations: int = 0
    seconds: float = 0.0


@dataclass
class ConvergenceReport:
    field: str
    element: str
    levels: list = field(default_factory=list)

    @property
    def dofs(self):
        return [lv.dofs for lv in self.levels]

    @property
    def errors(self):
        return [lv.rel_l2_error for lv in self.levels]

    @property
    def eocs(self):
        return eoc(self.dofs, self.errors)

    def rows(self):
        rates = [None] + self.eocs
        return [(self.element, lv.level, lv.dofs, lv.rel_l2_error, r)
                for lv, r in zip(self.levels, rates)]

    def to_dict(self):
        return {"field": self.field, "element": self.element,
                "levels": [asdict(lv) for lv in self.levels], "eoc": self.eocs}


def level_divisions(base, k):
    return tuple(int(b) * 2 ** k for b in base)


def convergence_mesh(k, base=CONVERGENCE_BASE):
    div = level_divisions(base, k)
    if div[0] % 3:
        raise ValueError("x-divisions must be a multiple of 3 to resolve x = ±1")
    return box_tet_mesh(CONVERGENCE_DOMAIN, div, interfaces=_PLANES)


def run_convergence(field_id, element, levels=4, condense=True, tol=1e-10, target=None,
                    base=CONVERGENCE_BASE, log=None):
    """Quasi-projection of a benchmark field on a sequence of uniform meshes.

    ``levels`` is a count (k = 0..levels-1) or an explicit list of k.
    ``target`` overrides the benchmark field (used for reproduction checks).
    """
    elem = get_element(element)
    tgt = target if target is not None else FIELDS[field_id]
    ks = range(levels) if isinstance(levels, int) else levels
    report = ConvergenceReport(field_id, element)
    for k in ks:
        t0 = time.perf_counter()
        mesh = convergence_mesh(k, base)
        sys = asm.assemble_projection(mesh, elem, tgt, condense=condense)
        info = {}
        x = asm.solve(sys, rel_tol=tol, info=info)
        err = asm.l2_error(mesh, elem, sys.meta["dofmap"], x, tgt)
        lv = ConvergenceLevel(k, level_divisions(base, k), mesh.n_cells, sys.n_full, err,
                              info["iterations"], time.perf_counter() - t0)
        report.levels.append(lv)
        if log:
            log(f"{field_id} {element} k={k} dofs={lv.dofs} err={err:.4e} "
                f"it={lv.iterations} {lv.seconds:.1f}s")
    return report


# --------------------------------------------------------------------------
# Dilatation experiment


def compute_meso_params(macro, micro):
    """Meso moduli (mu_e, lambda_e) from macro and micro (mu, lambda) pairs.

    Uses mu_e = mu_mi mu_ma / (mu_mi - mu_ma) and the same harmonic-type
    relation for the bulk-like combination 2 mu + 3 lambda.
    """
    mu_ma, lam_ma = macro
    mu_mi, lam_mi = micro
    if mu_mi <= mu_ma:
        raise ValueError("need mu_micro > mu_macro")
    k_ma, k_mi = 2 * mu_ma + 3 * lam_ma, 2 * mu_mi + 3 * lam_mi
    if k_mi <= k_ma:
        raise ValueError("need 2 mu_micro + 3 lambda_micro > 2 mu_macro + 3 lambda_macro")
    mu_e = mu_mi * mu_ma / (mu_mi - mu_ma)
    k_e = k_mi * k_ma / (k_mi - k_ma)
    return mu_e, (k_e - 2 * mu_e) / 3.0


@dataclass(frozen=True)
class DilatationSetup:
    """Two-material cube: inner (-1,1)^3 and outer shell of [-2,2]^3."""

    mu_macro: float = 76.9
    lambda_macro_inner: float = 115.4
    micro_factor_mu: float = 10.0
    micro_factor_lambda_inner: float = 10.0
    outer_lambda_ratio: float = 0.1
    micro_factor_lambda_outer: float = 100.0
    mu_c: float = 0.0
    L_c: float = 1.0
    stretch: float = 0.1

    def materials(self):
        mu_mi = self.micro_factor_mu * self.mu_macro
        lam_ma_i = self.lambda_macro_inner
        lam_ma_o = lam_ma_i * self.outer_lambda_ratio
        out = []
        for lam_ma, lam_mi in ((lam_ma_i, self.micro_factor_lambda_inner * lam_ma_i),
                               (lam_ma_o, self.micro_factor_lambda_outer * lam_ma_o)):
            mu_e, lam_e = compute_meso_params((self.mu_macro, lam_ma), (mu_mi, lam_mi))
            out.append(asm.MaterialParams(mu_e, lam_e, mu_mi, lam_mi, self.mu_c,
                                          self.mu_macro, self.L_c))
        return out

    def displacement(self, x):
        return self.stretch * np.asarray(x)

    def displacement_gradient(self, x):
        return np.broadcast_to(self.stretch * np.eye(3), np.shape(x)[:-1] + (3, 3))


def dilatation_mesh(k, base=DILATATION_BASE):
    div = level_divisions(base, k)
    if any(d % 4 for d in div):
        raise ValueError("divisions must be multiples of 4 to resolve the inner cube")
    planes = tuple((a, v) for a in range(3) for v in (-1.0, 1.0))
    return box_tet_mesh(DILATATION_DOMAIN, div, interfaces=planes)


def inner_region(mesh):
    """0 for cells inside (-1,1)^3, 1 for the outer shell."""
    return np.where(np.all(np.abs(mesh.centroids()) < 1.0, axis=1), 0, 1)


@dataclass
class DilatationLevel:
    level: int
    cells: int
    dofs: int
    energy: float
    quadratic_form: float
    iterations: int = 0
    seconds: float = 0.0


@dataclass
class DilatationReport:
    pair: tuple
    mode: str
    levels: list = field(default_factory=list)
    solution: dict = field(default_factory=dict, repr=False)

    @property
    def energies(self):
        return [lv.energy for lv in self.levels]

    def to_dict(self):
        return {"pair": list(self.pair), "mode": self.mode,
                "levels": [{"cells": lv.cells, "energy": lv.energy, "level": lv.level,
                            "dofs": lv.dofs, "iterations": lv.iterations,
                            "seconds": lv.seconds} for lv in self.levels]}


def cell_average_trace(mesh, elem, dofmap, coeffs):
    rule = cell_rule(mesh.cell_type, 2 * elem.degree)
    P = asm.evaluate_field(mesh, elem, dofmap, coeffs, rule.points)
    return np.einsum("cq,q->c", t3.trace(P), rule.weights) / rule.weights.sum()


def run_dilatation(disp="U1", micro="S0", mode="coupling", levels=2, setup=None,
                   condense=True, tol=1e-10, base=DILATATION_BASE, keep_solution=True, log=None):
    """Expansion u = s x on the outer boundary of the two-material cube.

    ``mode`` is a boundary mode of :func:`hsymcurl.assembly.rmm_constraints`.
    """
    if disp not in DISP_ELEMENTS or micro not in MICRO_ELEMENTS or mode not in BC_MODES:
        raise ValueError(f"invalid dilatation configuration {disp}/{micro}/{mode}")
    setup = setup or DilatationSetup()
    mats = setup.materials()
    ue, pe = get_element(disp), get_element(micro)
    report = DilatationReport((disp, micro), mode)
    ks = range(levels) if isinstance(levels, int) else levels
    for k in ks:
        t0 = time.perf_counter()
        mesh = dilatation_mesh(k, base)
        sys = asm.assemble_rmm(mesh, ue, pe, mats, inner_region(mesh), condense=condense)
        prob = sys.meta["problem"]
        dofs, vals, modes = asm.rmm_constraints(prob, setup.displacement,
                                                setup.displacement_gradient, mode)
        csys = asm.apply_essential_bc(sys, dofs, vals, modes)
        info = {}
        x = asm.solve(csys, rel_tol=tol, info=info)
        xs = x[sys.keep]
        quad = float(0.5 * xs @ (sys.A @ xs) - xs @ sys.b)
        e = asm.energy(prob, x)
        lv = DilatationLevel(k, mesh.n_cells, prob.n_full, e, quad, info["iterations"],
                             time.perf_counter() - t0)
        report.levels.append(lv)
        if keep_solution:
            u, P = prob.split(x)
            report.solution = {"mesh": mesh, "u": u, "P": P, "problem": prob,
                               "trace_P": cell_average_trace(mesh, pe, prob.p_dofs, P)}
        if log:
            log(f"{disp}x{micro} {mode} k={k} cells={mesh.n_cells} dofs={lv.dofs} "
                f"energy={e:.4f} it={lv.iterations} {lv.seconds:.1f}s")
    return report


# --------------------------------------------------------------------------
# Output

CSV_HEADER = ("element", "level", "dofs", "rel_l2_error", "eoc")


def emit(report, fmt, out_dir, stem=None):
    """Write a report as csv, json or (dilatation only) vtk; returns the path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(report, ConvergenceReport):
        stem = stem or f"converge_{report.field}_{report.element}"
        if fmt == "csv":
            path = out / f"{stem}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(CSV_HEADER)
                for el, lv, n, err, r in report.rows():
                    w.writerow([el, lv, n, f"{err:.10e}", "" if r is None else f"{r:.6f}"])
            return path
        if fmt == "json":
            path = out / f"{stem}.json"
            path.write_text(json.dumps(report.to_dict(), indent=2))
            return path
    elif isinstance(report, DilatationReport):
        stem = stem or f"dilatation_{report.pair[0]}_{report.pair[1]}_{report.mode}"
        if fmt == "json":
            path = out / f"{stem}.json"
            path.write_text(json.dumps(report.to_dict(), indent=2))
            return path
        if fmt == "csv":
            path = out / f"{stem}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(("pair", "mode", "level", "cells", "dofs", "energy"))
                for lv in report.levels:
                    w.writerow(["/".join(report.pair), report.mode, lv.level, lv.cells,
                                lv.dofs, f"{lv.energy:.10e}"])
            return path
        if fmt == "vtk":
            if not report.solution:
                raise ValueError("report holds no solution to export")
            path = out / f"{stem}.vtk"
            s = report.solution
            write_vtk(path, s["mesh"], cell_data={"trace_P": s["trace_P"],
                                                  "region": inner_region(s["mesh"])})
            return path
    raise ValueError(f"cannot emit {type(report).__name__} as {fmt!r}")
