"""Solve the line-defect cylinder twice: once with the default three-level
coarse-to-fine schedule, once directly on the fine grid from the harmonic
fill.  Prints final energy and wall time for each.

    python3 demos/coarse_to_fine_vs_single.py --n 48
"""

import argparse
import time

from ericksen_lab.config import parse_config
from ericksen_lab.experiments import boundary_problem
from ericksen_lab.solver import SolverOptions, coarse_to_fine, harmonic_fill, minimize


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=48)
    ap.add_argument("--levels", type=int, default=3)
    args = ap.parse_args()

    cfg = parse_config("experiment = line_defect\n", {"grid.n": str(args.n)})
    problem, n = boundary_problem(cfg)
    base = cfg.solver

    t0 = time.perf_counter()
    _, multi, reps = coarse_to_fine(problem, n, SolverOptions(
        max_iters=base.max_iters, grad_tol=base.grad_tol, coarse_to_fine_levels=args.levels))
    t_multi = time.perf_counter() - t0

    t0 = time.perf_counter()
    _, single = minimize(harmonic_fill(problem(n)), SolverOptions(
        max_iters=base.max_iters, grad_tol=base.grad_tol))
    t_single = time.perf_counter() - t0

    print(f"grid n = {n}, grad_tol = {base.grad_tol:g}")
    print(f"{args.levels}-level: energy {multi.final_energy:.8f}  "
          f"iterations per level {[r.iterations for r in reps]}  {t_multi:.1f} s")
    print(f"single : energy {single.final_energy:.8f}  iterations {single.iterations}  "
          f"{t_single:.1f} s")
    rel = (multi.final_energy - single.final_energy) / single.final_energy
    print(f"energy difference {100 * rel:+.4f} %, speed-up x{t_single / t_multi:.2f}")


if __name__ == "__main__":
    main()
