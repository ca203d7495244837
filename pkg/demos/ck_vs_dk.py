"""The same ball solved into the two cones.  Into the cone over S^2 the
hedgehog boundary data leaves a point defect; into the cone over RP^2 the
in-plane half-winding data leaves a line.

    python3 demos/ck_vs_dk.py --n 32
"""

import argparse

from ericksen_lab.config import parse_config
from ericksen_lab.experiments import run_point_defect_ck


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=32)
    ap.add_argument("--out", default="out/ck_vs_dk")
    args = ap.parse_args()
    cfg = parse_config("experiment = point_defect_ck\n",
                       {"grid.n": str(args.n), "output.dir": args.out})
    b = run_point_defect_ck(cfg)
    h = b.state.domain.h
    for name, bundle in (("C_k, hedgehog", b), ("D_k, half-winding", b.contrast)):
        print(name)
        for c in bundle.graph.components:
            print(f"  {c.label:9s} {c.voxel_count:4d} voxels, diameter {c.diameter / h:.2f} h")
    print(f"artifacts written under {args.out}")


if __name__ == "__main__":
    main()
