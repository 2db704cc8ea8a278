"""Lowest-order elements with the linear identity functions in physical coordinates.

The library defines the cell identity functions of Y0/S0 as polynomials on
the reference cell, so the local space is affine invariant.  This script
builds the variant in which the linear identity functions are 2x-1, 2y-1
and 2z-1 in global coordinates (optionally with global quadratic
monomials) and compares the B3/B4 projection errors of both variants on
the standard level schedule.  In the global-coordinate variant every cell
space contains a near-constant identity, which lets the discrete identity
approximately jump across facets at the cost of ill-conditioned local
blocks; the projections are therefore solved directly.
"""
import argparse
import json
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from hsymcurl import assembly as asm
from hsymcurl import bench
from hsymcurl import elements as el
from hsymcurl.polynomial import Poly

_MONOS = [(i, j, k) for i in range(3) for j in range(3) for k in range(3) if i + j + k <= 2]
# unisolvent sample points for re-expanding a global quadratic on each cell
_PTS = np.random.default_rng(0).random((len(_MONOS), 3)) * 0.3
_VINV = np.linalg.inv(np.array([[np.prod(p ** np.array(m)) for m in _MONOS] for p in _PTS]))


def _add_global_identity(builder, func):
    """Identity function func(x) 𝟙 with func a global polynomial of degree <= 2."""
    def coef(fr, t):
        x = fr.X[:, :1, :] + np.einsum("cij,qj->cqi", fr.J, _PTS)
        return (func(x) @ _VINV.T)[:, t]

    parts = [(Poly({m: 1.0}), lambda fr, t=t: coef(fr, t)[:, None, None] * el.E)
             for t, m in enumerate(_MONOS)]
    builder.add((3, 0, builder.next_slot(3, 0)), parts, identity=True)


def global_variant(kind, quadratic="edge"):
    """Y0 or S0 with global linear identities; S0 quadratics 'edge' or 'monomial'."""
    b = el._Builder(kind, "tet")
    el._add_nedelec(b, False)
    for i in range(3):
        _add_global_identity(b, lambda x, i=i: 2 * x[..., i] - 1)
    if kind == "S0":
        if quadratic == "edge":
            el._add_identities(b, el._edge_scalars([2]))
        else:
            for i, j in ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)):
                _add_global_identity(b, lambda x, i=i, j=j: x[..., i] * x[..., j])
    return b.done()


def projection_errors(elem, field, levels):
    out = []
    for k in range(levels):
        mesh = bench.convergence_mesh(k)
        sys = asm.assemble_projection(mesh, elem, field, condense=True)
        x = sys.expand(spla.spsolve(sys.A.tocsc(), sys.b))
        out.append((sys.n_full, asm.l2_error(mesh, elem, sys.meta["dofmap"], x, field)))
        print(f"  {elem.kind} k={k} dofs={out[-1][0]} err={out[-1][1]:.4e}", flush=True)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--out", default="results/identity_coordinates.json")
    args = ap.parse_args()
    variants = {"Y0/reference": el.get_element("Y0"), "Y0/global": global_variant("Y0"),
                "S0/reference": el.get_element("S0"),
                "S0/global-edge": global_variant("S0", "edge"),
                "S0/global-monomial": global_variant("S0", "monomial")}
    result = {}
    for fid in ("B4", "B3"):
        for name, elem in variants.items():
            print(f"{fid} {name}", flush=True)
            rows = projection_errors(elem, bench.FIELDS[fid], args.levels)
            dofs, errs = [r[0] for r in rows], [r[1] for r in rows]
            result[f"{fid}/{name}"] = {"dofs": dofs, "errors": errs,
                                       "eoc": bench.eoc(dofs, errs)}
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result, indent=2))
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
