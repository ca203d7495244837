"""Command line entry point: ``ericksen-lab <subcommand> ...``.

Exit codes: 0 success, 1 validation error, 2 solver non-convergence,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import defects as dfx
from . import frequency as fq
from .cone import ConeParams, InvalidInputError
from .config import KEYS, ConfigError, Experiment, parse_config
from .experiments import ArtifactBundle, dyadic_radii, run_experiment, solve, write_bundle
from .fileio import FieldFileError, defect_report_lines, defect_summary_csv, load_field, \
    profile_csv, save_field, table_csv
from .grid import box_domain
from .oracle import Homogeneous2DMinimizer, el_residual, lift_cylinder, sample_circle

EXIT_OK, EXIT_INVALID, EXIT_NOCONV, EXIT_IO = 0, 1, 2, 3


def _vec(text, n=3):
    parts = [float(x) for x in text.split(",")]
    if len(parts) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers")
    return parts


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _add_config_flags(p):
    p.add_argument("--config", type=Path, help="config file (key = value lines)")
    g = p.add_argument_group("config overrides")
    for key in KEYS:
        g.add_argument(f"--{key}", dest=f"cfg:{key}", metavar="VALUE")


def _overrides(ns):
    return {k[4:]: v for k, v in vars(ns).items() if k.startswith("cfg:") and v is not None}


def _load_config(ns, experiment=None):
    text = ns.config.read_text() if ns.config else ""
    ov = _overrides(ns)
    if experiment is not None:
        ov["experiment"] = experiment
    return parse_config(text, ov)


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_minimize(ns):
    cfg = _load_config(ns)
    state, rep, reps = solve(cfg)
    b = ArtifactBundle(cfg, state, rep, reps)
    write_bundle(b)
    print(f"energy {rep.final_energy:.12g}  rel grad {rep.final_rel_grad:.3g}  "
          f"iterations {rep.iterations}  converged {rep.converged}")
    return EXIT_OK if rep.converged else EXIT_NOCONV


def cmd_experiment(ns):
    cfg = _load_config(ns, ns.name)
    b = run_experiment(cfg)
    for name, c in b.checks.items():
        print(f"{'PASS' if c.passed else 'FAIL'}  {name}")
    if b.contrast is not None:
        for name, c in b.contrast.checks.items():
            print(f"{'PASS' if c.passed else 'FAIL'}  contrast.{name}")
    print(f"outputs in {cfg.output.dir}")
    ok = b.converged and (b.contrast is None or b.contrast.converged)
    return EXIT_OK if ok else EXIT_NOCONV


def cmd_diagnose(ns):
    st = load_field(ns.field)
    radii = ns.radii or dyadic_radii(4.0 * st.domain.h, 0.4)
    prof = fq.frequency_profile(st, ns.center, radii, clamp=not ns.no_clamp)
    for r, why in prof.dropped:
        print(f"dropped r={r:.6g}: {why}", file=sys.stderr)
    _emit(profile_csv(prof), ns.out)
    if ns.doubling and len(prof.radii) >= 2:
        rep = fq.check_doubling(st, ns.center, prof.radii[0], prof.radii[-1], tol=ns.tol)
        print(f"doubling {'pass' if rep.passed else 'fail'}  log2(H(R)/H(r)) = {rep.log2_ratio:.6g}",
              file=sys.stderr)
    return EXIT_OK


def cmd_blowup(ns):
    st = load_field(ns.field)
    ups = fq.blowup_rescale(st, ns.center, ns.radius[0], ns.n)
    save_field(ns.out, ups)
    print(f"wrote {ns.out}: mean |u|^2 on B_1 = {fq.ball_mean_u2(ups, (0, 0, 0), 1.0):.6g}")
    if len(ns.radius) > 1:
        hd = fq.homogeneity_defect(st, ns.center, ns.radius, ns.n)
        print(f"homogeneity defect over radii {ns.radius}: {hd:.6g}")
    return EXIT_OK


def cmd_oracle2d(ns):
    m = Homogeneous2DMinimizer(k=ns.k, amplitude=ns.amplitude, phase=ns.phase)
    rows = []
    for n in ns.samples:
        rows.append((n, el_residual(sample_circle(m, n), m.k, m.alpha)))
    _emit(table_csv(["samples", "el_residual"], [(n, float(r)) for n, r in rows]), ns.out)
    if ns.field:
        nn = int(round(2.0 * ns.half_width / ns.h)) + 1
        dom = box_domain((nn, nn, ns.layers), ns.h, (-ns.half_width, -ns.half_width, 0.0),
                         free_axes=(2,))
        save_field(ns.field, lift_cylinder(m, dom, params=ConeParams(m.k)))
    return EXIT_OK


def cmd_topology(ns):
    st = load_field(ns.field)
    out = {"loops": [], "spheres": []}
    for lp in ns.loop or []:
        c, n, r = lp[:3], lp[3:6], lp[6]
        try:
            cls = dfx.loop_class(st, dfx.circle_loop(c, n, r, ns.samples), ns.s_floor)
            out["loops"].append({"loop": lp, "class": cls})
        except (dfx.ClassUndefinedError, dfx.AmbiguousLoopError) as exc:
            out["loops"].append({"loop": lp, "class": None, "error": str(exc)})
    if ns.sphere:
        g = dfx.build_defect_graph(st, dfx.extract_zero_set(st, ns.eps_z))
        for sp in ns.sphere:
            rep = dfx.sphere_crossing_parity(st, sp[:3], sp[3], g)
            out["spheres"].append({"sphere": sp, "crossings": len(rep.crossings),
                                   "class1": rep.n_class1, "even": rep.passed})
    _emit(json.dumps(out, indent=1) + "\n", ns.out)
    return EXIT_OK


def cmd_defects(ns):
    st = load_field(ns.field)
    zs = dfx.extract_zero_set(st, ns.eps_z)
    g = dfx.build_defect_graph(st, zs)
    scales = ns.scales or list(np.geomspace(4 * st.domain.h, 0.2, 3))
    g = dfx.classify_components(st, g, scales, min_boundary_distance=ns.margin)
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "defects.jsonl").write_text(defect_report_lines(g))
    (out / "defects_summary.csv").write_text(defect_summary_csv(g))
    for i, c in enumerate(g.components):
        print(f"component {i}: {c.label}, {c.voxel_count} voxels, diameter {c.diameter:.4g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ericksen-lab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("minimize", help="solve the configured problem and write the field")
    _add_config_flags(m)
    m.set_defaults(func=cmd_minimize)

    e = sub.add_parser("experiment", help="run a canned experiment with its checks")
    e.add_argument("name", choices=[x.value for x in Experiment if x is not Experiment.CUSTOM])
    _add_config_flags(e)
    e.set_defaults(func=cmd_experiment)

    d = sub.add_parser("diagnose", help="frequency profile r,D,E,H,N about a centre")
    d.add_argument("field", type=Path)
    d.add_argument("--center", type=_vec, required=True)
    d.add_argument("--radii", type=_floats)
    d.add_argument("--no-clamp", action="store_true")
    d.add_argument("--doubling", action="store_true")
    d.add_argument("--tol", type=float, default=0.05)
    d.add_argument("--out")
    d.set_defaults(func=cmd_diagnose)

    b = sub.add_parser("blowup", help="L2-normalised rescaling onto the unit ball")
    b.add_argument("field", type=Path)
    b.add_argument("--center", type=_vec, required=True)
    b.add_argument("--radius", type=_floats, required=True,
                   help="one radius, or several to also report the homogeneity defect")
    b.add_argument("--n", type=int, default=33)
    b.add_argument("--out", type=Path, required=True)
    b.set_defaults(func=cmd_blowup)

    o = sub.add_parser("oracle2d", help="closed-form 2D minimiser: residuals and sampled field")
    o.add_argument("--k", type=float, default=4.0)
    o.add_argument("--amplitude", type=float, default=1.0)
    o.add_argument("--phase", type=float, default=0.0)
    o.add_argument("--samples", type=lambda t: [int(x) for x in t.split(",")], default=[2048, 4096])
    o.add_argument("--field", type=Path, help="also write the lift on a planar slab")
    o.add_argument("--h", type=float, default=1.0 / 64.0)
    o.add_argument("--half-width", type=float, default=1.0)
    o.add_argument("--layers", type=int, default=3)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle2d)

    t = sub.add_parser("topology", help="Z2 loop classes and sphere crossing parity")
    t.add_argument("field", type=Path)
    t.add_argument("--loop", type=lambda x: _vec(x, 7), action="append",
                   help="cx,cy,cz,nx,ny,nz,radius")
    t.add_argument("--sphere", type=lambda x: _vec(x, 4), action="append", help="cx,cy,cz,radius")
    t.add_argument("--samples", type=int, default=256)
    t.add_argument("--s-floor", type=float, default=0.2)
    t.add_argument("--eps-z", type=float, default=0.1)
    t.add_argument("--out")
    t.set_defaults(func=cmd_topology)

    f = sub.add_parser("defects", help="extract and classify the defect set")
    f.add_argument("field", type=Path)
    f.add_argument("--eps-z", type=float, default=0.1)
    f.add_argument("--scales", type=_floats)
    f.add_argument("--margin", type=float, default=0.15)
    f.add_argument("--out", default="defects_out")
    f.set_defaults(func=cmd_defects)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return ns.func(ns)
    except ConfigError as exc:
        print(f"invalid configuration:\n{exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FieldFileError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidInputError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
