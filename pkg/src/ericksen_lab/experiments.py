"""Canned experiments: line defect in a cylinder, point defect in a ball
(C_k target, with a paired D_k contrast run), and the analytic cylinder
oracle.

Every runner returns an :class:`ArtifactBundle` and, when ``write`` is
set, writes into ``config.output.dir``:

    config.txt             canonical config
    field.edlf             minimised field
    solve_report.json      iterations, energies, convergence flags
    energy_trace.csv       accepted-step energies
    profile_<i>.csv        r,D,E,H,N at each diagnostic centre
    defects.jsonl          one record per defect component
    defects_summary.csv
    checks.json            named pass/fail entries with measured values
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import defects as dfx
from . import frequency as fq
from .cone import ConeParams, TargetMode
from .config import BoundarySpec, Experiment, ExperimentConfig, build_domain, boundary_values, \
    serialize_config
from .energy import radial_variation_residual, total_energy
from .fileio import defect_report_lines, defect_summary_csv, encode_field, load_field, profile_csv, \
    table_csv
from .grid import LineFieldState, box_domain
from .oracle import Homogeneous2DMinimizer, el_residual, hopf_differential, lift_cylinder, \
    planar_grid, sample_circle
from .solver import InitMode, SolveReport, coarse_to_fine, minimize

log = logging.getLogger(__name__)


@dataclass
class Check:
    passed: bool
    value: object = None
    detail: str = ""


@dataclass
class ArtifactBundle:
    config: ExperimentConfig
    state: LineFieldState
    report: Optional[SolveReport] = None
    level_reports: list = field(default_factory=list)
    graph: Optional[dfx.DefectGraph] = None
    profiles: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    contrast: Optional["ArtifactBundle"] = None

    @property
    def converged(self) -> bool:
        return self.report is None or self.report.converged


def boundary_problem(cfg: ExperimentConfig):
    """``m -> state`` on an ``m``-node-wide version of the configured grid,
    boundary populated, interior zero."""
    grid = cfg.grid
    params = ConeParams(cfg.cone.k, cfg.cone.target_mode)
    n_full = grid.n if grid.shape != "box" else grid.dims[0]

    def problem(m: int) -> LineFieldState:
        if grid.shape == "box":
            f = (n_full - 1) / (m - 1)
            dims = tuple(int(round((d - 1) / f)) + 1 for d in grid.dims)
            dom = box_domain(dims, grid.h * f, grid.origin)
        else:
            dom = build_domain(replace(grid, n=m))
        values = np.zeros(dom.dims + (3,))
        b = dom.boundary
        values[b] = boundary_values(cfg.boundary, dom.coords[b])
        return LineFieldState(dom, values, params)

    return problem, n_full


def solve(cfg: ExperimentConfig):
    """Build and minimise the configured problem.

    With ``init_mode = from_file`` the interior of ``cfg.init_file`` seeds a
    single-level solve on the full grid.
    """
    problem, n = boundary_problem(cfg)
    opts = cfg.solver
    if opts.init_mode is InitMode.FROM_FILE:
        st = problem(n)
        src = load_field(cfg.init_file)
        if src.domain.dims != st.domain.dims:
            raise ValueError(f"init file grid {src.domain.dims} does not match {st.domain.dims}")
        vals = st.values.copy()
        vals[st.domain.interior] = src.values[st.domain.interior]
        st, rep = minimize(st.with_values(vals), opts)
        return st, rep, [rep]
    return coarse_to_fine(problem, n, opts)


def dyadic_radii(lo: float, hi: float):
    out = []
    r = lo
    while r <= hi * (1 + 1e-12):
        out.append(r)
        r *= 2.0
    return out


def auto_scales(cfg: ExperimentConfig, h: float):
    if cfg.diagnostics.flatness_scales:
        return list(cfg.diagnostics.flatness_scales)
    lo, hi = 4.0 * h, 0.2
    return list(np.geomspace(lo, hi, 3)) if hi > lo else [lo]


def _main_curve(graph: dfx.DefectGraph):
    curves = [c for c in graph.components if c.label == "curve"]
    if not curves:
        return None
    return max(curves, key=lambda c: c.voxel_count)


def defect_points(comp: dfx.Component, count: int, near_z: float):
    """``count`` consecutive polyline vertices centred on height ``near_z``."""
    P = comp.polyline
    i = int(np.argmin(np.abs(P[:, 2] - near_z)))
    lo = max(0, min(i - count // 2, len(P) - count))
    return [P[j] for j in range(lo, min(lo + count, len(P)))]


def normalised_radial_residuals(state, report, trials: int, seed: int):
    """``|d/dt E((1 + t phi) w)| / (max|phi| E)`` for random ``phi``."""
    rng = np.random.default_rng(seed)
    dom = state.domain
    E = report.final_energy if report is not None else total_energy(state)
    out = []
    for _ in range(trials):
        phi = np.zeros(dom.dims)
        phi[dom.interior] = rng.uniform(-1.0, 1.0, size=int(dom.interior.sum()))
        res = radial_variation_residual(state, phi)
        out.append(abs(res) / (np.abs(phi).max() * max(E, 1e-300)))
    return out


def _config_diagnostics(bundle: ArtifactBundle):
    cfg, st = bundle.config, bundle.state
    diag = cfg.diagnostics
    for i, c in enumerate(diag.centers):
        radii = diag.radii or dyadic_radii(4.0 * st.domain.h, 0.4)
        bundle.profiles[f"center_{i}"] = fq.frequency_profile(st, c, radii)
    for i, lp in enumerate(diag.loops):
        try:
            v = dfx.loop_class(st, dfx.circle_loop(lp.center, lp.normal, lp.radius), diag.s_floor)
            bundle.checks[f"loop_{i}"] = Check(True, v)
        except (dfx.ClassUndefinedError, dfx.AmbiguousLoopError) as exc:
            bundle.checks[f"loop_{i}"] = Check(False, None, str(exc))
    if bundle.graph is not None:
        for i, sp in enumerate(diag.spheres):
            rep = dfx.sphere_crossing_parity(st, sp.center, sp.radius, bundle.graph)
            bundle.checks[f"sphere_{i}"] = Check(rep.passed, rep.n_class1,
                                                  f"{len(rep.crossings)} crossings")


def _analyse_defects(state, cfg, scales):
    zs = dfx.extract_zero_set(state, cfg.diagnostics.eps_z)
    graph = dfx.build_defect_graph(state, zs)
    return zs, dfx.classify_components(state, graph, scales, s_floor=cfg.diagnostics.s_floor,
                                       min_boundary_distance=cfg.diagnostics.cap_margin)


def run_line_defect(cfg: ExperimentConfig, write: bool = True) -> ArtifactBundle:
    """Cylinder with in-plane boundary director, free caps; solve and check."""
    state, rep, reps = solve(cfg)
    dom = state.domain
    h = dom.h
    diag = cfg.diagnostics
    scales = auto_scales(cfg, h)
    zs, graph = _analyse_defects(state, cfg, scales)
    b = ArtifactBundle(cfg, state, rep, reps, graph)
    ck = b.checks
    ck["converged"] = Check(rep.converged, rep.final_rel_grad)
    ck["energy_monotone"] = Check(all(r.monotone for r in reps))
    ck["max_principle"] = Check(rep.max_interior_u <= rep.max_boundary_u + 1e-9,
                                (rep.max_interior_u, rep.max_boundary_u))
    hit = [bool(np.any(zs.mask[:, :, l])) for l in range(dom.dims[2])]
    ck["defect_every_slice"] = Check(all(hit), sum(hit), f"{sum(hit)}/{len(hit)} slices")

    R = cfg.grid.radius
    classes = []
    for l in range(dom.dims[2]):
        z = dom.origin[2] + l * h
        try:
            classes.append(dfx.loop_class(state, dfx.circle_loop((0.0, 0.0, z), (0, 0, 1), R, 512),
                                          diag.s_floor, zs.s_ref))
        except (dfx.ClassUndefinedError, dfx.AmbiguousLoopError):
            classes.append(None)
    ck["boundary_loop_class"] = Check(all(c == 1 for c in classes), classes)

    comp = _main_curve(graph)
    ck["curve_found"] = Check(comp is not None, sum(c.label == "curve" for c in graph.components))
    if comp is not None:
        zmid = dom.origin[2] + 0.5 * h * (dom.dims[2] - 1)
        pts = defect_points(comp, diag.defect_points, zmid)
        radii = dyadic_radii(4.0 * h, 0.4)
        mono, parity, doubling = [], [], []
        for i, a in enumerate(pts):
            prof = fq.frequency_profile(state, a, radii)
            b.profiles[f"defect_{i}"] = prof
            mono.append(fq.check_frequency_monotone(prof, diag.mono_slack).passed
                        if len(prof.radii) >= 2 else False)
            if len(prof.radii) >= 2:
                doubling.append(fq.check_doubling(state, a, prof.radii[0], prof.radii[-1]).passed)
            try:
                pr = dfx.sphere_crossing_parity(state, a, diag.sphere_radius, graph)
                parity.append(pr.n_class1)
            except fq.DomainError:
                parity.append(None)
        ck["frequency_monotone"] = Check(all(mono) and len(mono) == diag.defect_points,
                                         [list(map(float, b.profiles[f"defect_{i}"].N))
                                          for i in range(len(pts))])
        ck["doubling"] = Check(all(doubling) and bool(doubling), doubling)
        ck["sphere_parity"] = Check(all(p == 2 for p in parity) and len(parity) == diag.defect_points,
                                    parity)
        eps = [e for _, _, e in comp.flatness]
        ck["flatness"] = Check(bool(eps) and max(eps) <= 0.2, max(eps) if eps else None)
        try:
            hd = fq.homogeneity_defect(state, pts[len(pts) // 2], [4.0 * h, 8.0 * h])
        except (fq.DomainError, fq.DegenerateBlowupError):
            hd = None
        ck["homogeneity_defect"] = Check(True, hd, "reported, not asserted")
        if len(graph.separations):
            ck["separations"] = Check(True, {f"{i}-{j}": d for (i, j), d in graph.separations.items()})
    res = normalised_radial_residuals(state, rep, diag.residual_trials, cfg.solver.seed)
    ck["radial_residual"] = Check(all(r <= 10.0 * cfg.solver.grad_tol for r in res), res)
    _config_diagnostics(b)
    if write:
        write_bundle(b)
    return b


def run_point_defect_ck(cfg: ExperimentConfig, write: bool = True, contrast: bool = True
                        ) -> ArtifactBundle:
    """Ball with hedgehog boundary data in the C_k target.  Optionally a
    paired D_k run on the same ball with in-plane half-winding data."""
    if cfg.cone.target_mode is not TargetMode.CK_NO_QUOTIENT:
        raise ValueError("point_defect_ck requires the Ck_no_quotient target")
    state, rep, reps = solve(cfg)
    h = state.domain.h
    scales = auto_scales(cfg, h)
    zs, graph = _analyse_defects(state, cfg, scales)
    b = ArtifactBundle(cfg, state, rep, reps, graph)
    diam = [c.diameter for c in graph.components]
    b.checks["converged"] = Check(rep.converged, rep.final_rel_grad)
    b.checks["energy_monotone"] = Check(all(r.monotone for r in reps))
    b.checks["max_principle"] = Check(rep.max_interior_u <= rep.max_boundary_u + 1e-9,
                                      (rep.max_interior_u, rep.max_boundary_u))
    b.checks["isolated_only"] = Check(all(d <= 4.0 * h for d in diam), diam)
    n_curve = sum(c.label == "curve" for c in graph.components)
    b.checks["no_curves"] = Check(n_curve == 0, n_curve)
    b.checks["defect_found"] = Check(len(diam) > 0, len(diam))
    _config_diagnostics(b)
    if contrast:
        ccfg = replace(cfg, cone=ConeParams(cfg.cone.k, TargetMode.DK_QUOTIENT),
                       boundary=BoundarySpec("planar_half_winding", cfg.boundary.s0),
                       output=replace(cfg.output, dir=str(Path(cfg.output.dir) / "contrast_dk")))
        cst, crep, creps = solve(ccfg)
        _, cgraph = _analyse_defects(cst, ccfg, scales)
        cb = ArtifactBundle(ccfg, cst, crep, creps, cgraph)
        nc = sum(c.label == "curve" for c in cgraph.components)
        cb.checks["converged"] = Check(crep.converged, crep.final_rel_grad)
        cb.checks["curve_found"] = Check(nc >= 1, nc)
        b.contrast = cb
        b.checks["contrast_curve_found"] = Check(nc >= 1, nc)
        if write:
            write_bundle(cb)
    if write:
        write_bundle(b)
    return b


def run_cylinder_oracle(cfg: ExperimentConfig, write: bool = True) -> ArtifactBundle:
    """Analytic half-winding lift sampled on the configured grid (no solve)."""
    k = cfg.cone.k
    m = Homogeneous2DMinimizer(k=k, amplitude=cfg.boundary.s0)
    dom = build_domain(cfg.grid)
    state = lift_cylinder(m, dom, params=ConeParams(k, cfg.cone.target_mode))
    b = ArtifactBundle(cfg, state)
    diag = cfg.diagnostics
    centers = diag.centers or ((0.0, 0.0, 0.0),)
    radii = diag.radii or dyadic_radii(4.0 * dom.h, 0.4)
    dens = fq.energy_density(state)
    for i, c in enumerate(centers):
        b.profiles[f"center_{i}"] = prof = fq.frequency_profile(state, c, radii)
        inwin = (prof.radii >= 0.1 - 1e-12) & (prof.radii <= 0.4 + 1e-12)
        N = prof.N[inwin]
        b.checks[f"frequency_value_{i}"] = Check(bool(len(N)) and bool(np.all(np.abs(N - m.alpha) <= 0.03)),
                                                  list(map(float, N)))
        ratios = []
        for r in (0.1, 0.15, 0.2):
            try:
                _, _, H1, _ = fq.frequency_quantities(state, c, r, density=dens)
                _, _, H2, _ = fq.frequency_quantities(state, c, 2 * r, density=dens)
                ratios.append(float(np.log2(H2 / H1)))
            except fq.DomainError:
                ratios.append(None)
        target = 2.0 + 2.0 * m.alpha
        b.checks[f"doubling_exponent_{i}"] = Check(
            all(x is not None and abs(x - target) <= 0.05 for x in ratios), ratios)
    res = el_residual(sample_circle(m, 4096), k, m.alpha)
    b.checks["el_residual"] = Check(res <= 1e-4, res)
    w, X, Y = planar_grid(m, 1.0 / 128.0)
    om = np.abs(hopf_differential(w, 1.0 / 128.0, k))
    rr = np.hypot(X, Y)
    ann = (rr >= 0.3) & (rr <= 0.9) & np.isfinite(om)
    b.checks["hopf_max"] = Check(float(om[ann].max()) <= 5e-2, float(om[ann].max()))
    if write:
        write_bundle(b)
    return b


RUNNERS = {
    Experiment.LINE_DEFECT: run_line_defect,
    Experiment.POINT_DEFECT_CK: run_point_defect_ck,
    Experiment.CYLINDER_ORACLE: run_cylinder_oracle,
}


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ArtifactBundle:
    if cfg.experiment is Experiment.CUSTOM:
        state, rep, reps = solve(cfg)
        scales = auto_scales(cfg, state.domain.h)
        _, graph = _analyse_defects(state, cfg, scales)
        b = ArtifactBundle(cfg, state, rep, reps, graph)
        b.checks["converged"] = Check(rep.converged, rep.final_rel_grad)
        _config_diagnostics(b)
        if write:
            write_bundle(b)
        return b
    return RUNNERS[cfg.experiment](cfg, write=write)


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)) and not isinstance(x, bool):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def checks_json(bundle: ArtifactBundle) -> str:
    return json.dumps({k: {"passed": bool(c.passed), "value": _plain(c.value), "detail": c.detail}
                       for k, c in bundle.checks.items()}, indent=1, sort_keys=True) + "\n"


def write_bundle(bundle: ArtifactBundle) -> dict:
    out = Path(bundle.config.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}

    def put(name, data):
        p = out / name
        (p.write_bytes if isinstance(data, bytes) else p.write_text)(data)
        files[name] = p

    put("config.txt", serialize_config(bundle.config))
    put("field.edlf", encode_field(bundle.state))
    if bundle.report is not None:
        r = bundle.report
        put("solve_report.json", json.dumps({
            "iterations": r.iterations, "final_energy": r.final_energy,
            "final_rel_grad": r.final_rel_grad, "converged": r.converged,
            "monotone": r.monotone, "max_interior_u": r.max_interior_u,
            "max_boundary_u": r.max_boundary_u, "max_principle_ok": r.max_principle_ok,
            "wall_time": r.wall_time,
            "levels": [{"iterations": x.iterations, "final_energy": x.final_energy,
                        "converged": x.converged} for x in bundle.level_reports],
        }, indent=1) + "\n")
        put("energy_trace.csv", table_csv(["step", "energy"],
                                          [(i, float(e)) for i, e in enumerate(r.energy_trace)]))
    for name, prof in bundle.profiles.items():
        put(f"profile_{name}.csv", profile_csv(prof))
    if bundle.graph is not None:
        put("defects.jsonl", defect_report_lines(bundle.graph))
        put("defects_summary.csv", defect_summary_csv(bundle.graph))
    put("checks.json", checks_json(bundle))
    bundle.files = files
    return files
