"""Command-line driver: convergence studies, dilatation runs, sequence checks, mesh export.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure.
"""
import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _parser():
    ap = argparse.ArgumentParser(prog="hsymcurl", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, default=None,
                    help="cap BLAS/OpenMP threads (set before numerical libraries load)")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, formats):
        p.add_argument("--levels", type=int, default=None, help="number of refinement levels")
        p.add_argument("--out-dir", default="results")
        p.add_argument("--format", choices=formats, action="append", dest="formats")
        p.add_argument("--tol", type=float, default=1e-10, help="relative CG tolerance")
        p.add_argument("--condense", action=argparse.BooleanOptionalAction, default=True,
                       help="statically condense cell-private dofs")

    c = sub.add_parser("converge", help="quasi-projection convergence study")
    c.add_argument("--field", required=True, choices=["B1", "B2", "B3", "B4"])
    c.add_argument("--element", action="append", required=True, dest="elements")
    common(c, ["csv", "json"])

    d = sub.add_parser("dilatation", help="two-material dilatation experiment")
    d.add_argument("--element", default="S0", help="microdistortion element")
    d.add_argument("--order", type=int, default=1, choices=[1, 2],
                   help="polynomial order of the displacement element")
    d.add_argument("--bc", default="coupling", choices=["coupling", "neumann", "dirichlet", "sym-coupling"])
    common(d, ["csv", "json", "vtk"])

    s = sub.add_parser("sequence", help="rank/kernel reports of element spaces")
    s.add_argument("--element", action="append", dest="elements")
    s.add_argument("--out-dir", default=None)
    s.add_argument("--format", choices=["json"], default="json")

    m = sub.add_parser("mesh-export", help="write a study mesh as VTK")
    m.add_argument("--domain", choices=["convergence", "dilatation"], default="convergence")
    m.add_argument("--levels", type=int, default=1, help="refinement level k")
    m.add_argument("--out-dir", default="results")
    return ap


def _converge(args, bench):
    from .elements import ELEMENT_KINDS

    for el in args.elements:
        if el not in ELEMENT_KINDS or el in ("U1", "U2"):
            raise ValueError(f"unknown matrix element {el!r}")
    levels = args.levels or 4
    for el in args.elements:
        rep = bench.run_convergence(args.field, el, levels=levels, condense=args.condense,
                                    tol=args.tol, log=print)
        for fmt in args.formats or ["csv"]:
            print(f"wrote {bench.emit(rep, fmt, args.out_dir)}")
        rates = ", ".join("-" if r != r else f"{r:.2f}" for r in rep.eocs)
        print(f"{args.field} {el}: EOC [{rates}]")


def _dilatation(args, bench):
    rep = bench.run_dilatation(f"U{args.order}", args.element, args.bc,
                               levels=args.levels or 2, condense=args.condense, tol=args.tol,
                               log=print)
    for fmt in args.formats or ["json"]:
        print(f"wrote {bench.emit(rep, fmt, args.out_dir)}")


def _sequence(args):
    from . import sequence_lab as sl

    kinds = args.elements or ["Y0", "S0", "Y1", "S1", "Y2", "M2", "HexS0"]
    reports = [sl.sequence_report(k) for k in kinds]
    text = json.dumps([json.loads(r.to_json()) for r in reports], indent=2)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sequence.json").write_text(text)
    print(text)
    return EXIT_OK if all(r.passed for r in reports) else 1


def _mesh_export(args, bench):
    from .mesh import write_vtk

    k = args.levels
    mesh = bench.convergence_mesh(k) if args.domain == "convergence" else bench.dilatation_mesh(k)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"mesh_{args.domain}_{k}.vtk"
    write_vtk(path, mesh, cell_data={"volume": mesh.cell_volumes()})
    print(f"wrote {path} ({mesh.n_cells} cells)")


def main(argv=None):
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return EXIT_CONFIG
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)

    from . import bench
    from .solver import SolverError

    try:
        if args.command == "converge":
            _converge(args, bench)
        elif args.command == "dilatation":
            _dilatation(args, bench)
        elif args.command == "sequence":
            return _sequence(args)
        else:
            _mesh_export(args, bench)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, NotImplementedError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
