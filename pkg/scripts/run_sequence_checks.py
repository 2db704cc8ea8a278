"""Rank/kernel, inclusion and conformity checks for every element; writes JSON."""
import argparse
import json
from pathlib import Path

from hsymcurl import sequence_lab as sl
from hsymcurl.elements import get_element
from hsymcurl.mesh import box_hex_mesh, box_tet_mesh

KINDS = ("NI0", "NII1", "Y0", "S0", "Y1", "S1", "Y2", "M2", "Y3", "M3", "L1", "D1", "HexS0")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/sequence.json")
    args = ap.parse_args()
    out = {"reports": {}, "jumps": {}}
    for kind in KINDS:
        rep = sl.sequence_report(kind)
        out["reports"][kind] = json.loads(rep.to_json())
        e = get_element(kind)
        if e.cell_type == "hex":
            mesh = box_hex_mesh([(0, 2), (0, 1), (0, 1)], (2, 1, 1))
        else:
            mesh = box_tet_mesh([(0, 1)] * 3, (1, 1, 1))
        out["jumps"][kind] = {"sym": sl.facet_jumps(mesh, e),
                              "full_non_identity": sl.facet_jumps(mesh, e, sym_only=False,
                                                                  identity=False)}
        print(f"{kind}: rank {rep.symcurl_rank} kernel {rep.kernel_dim} passed={rep.passed} "
              f"sym jump {out['jumps'][kind]['sym']:.1e}", flush=True)
    rank, count = sl.linear_dependence_lemma()
    out["linear_dependence"] = {"rank": rank, "stacked": count}
    out["gradient_identity_intersection"] = sl.gradient_identity_intersection()
    out["hex_traceless"] = sl.hex_rho_traceless()
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(out, indent=2))
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
