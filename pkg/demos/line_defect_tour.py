"""Walk through the line-defect cylinder: solve, find the defect curve,
probe it with loops, spheres and the frequency function.

    python3 demos/line_defect_tour.py --n 32
"""

import argparse

import numpy as np

from ericksen_lab import defects as dfx
from ericksen_lab import frequency as fq
from ericksen_lab.config import parse_config
from ericksen_lab.experiments import defect_points, dyadic_radii, solve


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=32)
    args = ap.parse_args()
    cfg = parse_config("experiment = line_defect\n", {"grid.n": str(args.n)})

    state, rep, _ = solve(cfg)
    h = state.domain.h
    print(f"solved on {state.domain.dims} nodes, h = {h:.4f}: energy {rep.final_energy:.6f}, "
          f"{rep.iterations} iterations on the finest level")

    # The boundary director turns by pi around the cylinder, so every
    # horizontal slice must contain a zero of s.
    zs = dfx.extract_zero_set(state, cfg.diagnostics.eps_z)
    slices = [bool(zs.mask[:, :, l].any()) for l in range(state.domain.dims[2])]
    print(f"defect voxels: {int(zs.mask.sum())}, present on {sum(slices)}/{len(slices)} slices")

    graph = dfx.build_defect_graph(state, zs)
    graph = dfx.classify_components(state, graph, [4 * h, 6 * h], min_boundary_distance=0.15)
    for i, c in enumerate(graph.components):
        eps = max((e for _, _, e in c.flatness), default=float("nan"))
        print(f"component {i}: {c.label}, {c.voxel_count} voxels, "
              f"centreline from {np.round(c.endpoints[0], 3)} to {np.round(c.endpoints[1], 3)}, "
              f"max flatness {eps:.3f}")

    curve = next(c for c in graph.components if c.label == "curve")
    zmid = state.domain.origin[2] + 0.5 * h * (state.domain.dims[2] - 1)
    a = defect_points(curve, 1, zmid)[0]
    lp = dfx.circle_loop(a, (0, 0, 1), 0.3)
    print(f"loop of radius 0.3 around {np.round(a, 3)}: class {dfx.loop_class(state, lp)}")
    par = dfx.sphere_crossing_parity(state, a, 0.3, graph)
    print(f"sphere of radius 0.3: {len(par.crossings)} crossings, {par.n_class1} of class 1")

    prof = fq.frequency_profile(state, a, dyadic_radii(4 * h, 0.4))
    print("frequency profile at the defect point:")
    for r, D, E, H, N in prof.rows():
        print(f"  r = {r:.4f}  N = {N:.4f}   (homogeneous line value 0.25)")


if __name__ == "__main__":
    main()
