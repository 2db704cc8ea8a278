"""Run the four regularity benchmarks for every element and store CSV/JSON."""
import argparse
import json
from pathlib import Path

from hsymcurl import bench


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fields", nargs="+", default=list(bench.FIELDS))
    ap.add_argument("--elements", nargs="+", default=list(bench.CONVERGENCE_ELEMENTS))
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--out-dir", default="results/convergence")
    args = ap.parse_args()
    out = Path(args.out_dir)
    summary = {}
    for fid in args.fields:
        for el in args.elements:
            rep = bench.run_convergence(fid, el, levels=args.levels, log=print)
            bench.emit(rep, "csv", out)
            bench.emit(rep, "json", out)
            summary[f"{fid}/{el}"] = {"dofs": rep.dofs, "errors": rep.errors, "eoc": rep.eocs}
            (out / "summary.json").write_text(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
