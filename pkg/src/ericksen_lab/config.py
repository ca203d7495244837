"""Experiment configuration: a flat ``key = value`` text format.

Keys are dotted (``cone.k``, ``solver.grad_tol`` ...), ``#`` starts a
comment, blank lines are ignored.  Lists use ``,`` between numbers and
``;`` between items, e.g. ``diagnostics.centers = 0,0,0.5; 0,0,0.4``.
All errors are collected and reported together with their line numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

import numpy as np

from .cone import ConeParams, InvalidInputError, TargetMode
from .grid import GridDomain, ball_domain, box_domain, cylinder_domain
from .solver import InitMode, SolverOptions


class Experiment(str, Enum):
    LINE_DEFECT = "line_defect"
    POINT_DEFECT_CK = "point_defect_ck"
    CYLINDER_ORACLE = "cylinder_oracle"
    CUSTOM = "custom"


class ConfigError(ValueError):
    """Carries every problem found, as ``(line, key, message)`` triples."""

    def __init__(self, errors):
        self.errors = sorted(errors, key=lambda e: (e[0] == 0, e[0]))
        super().__init__("\n".join(f"line {ln}: {key}: {msg}" if ln else f"{key}: {msg}"
                                   for ln, key, msg in self.errors))


@dataclass(frozen=True)
class GridSpec:
    shape: str = "box"               # box | ball | cylinder
    n: int = 33                      # nodes across the diameter (ball, cylinder)
    radius: float = 1.0
    height: float = 1.0
    free_caps: bool = True
    dims: tuple = (33, 33, 33)       # box only
    h: float = 1.0 / 32.0
    origin: tuple = (-0.5, -0.5, -0.5)


@dataclass(frozen=True)
class BoundarySpec:
    generator: str = "constant"      # planar_half_winding | planar_radial | hedgehog | constant
    s0: float = 1.0
    vector: tuple = (1.0, 0.0, 0.0)  # constant generator only


@dataclass(frozen=True)
class LoopRequest:
    center: tuple
    normal: tuple
    radius: float


@dataclass(frozen=True)
class SphereRequest:
    center: tuple
    radius: float


@dataclass(frozen=True)
class DiagnosticsSpec:
    centers: tuple = ()
    radii: tuple = ()
    loops: tuple = ()
    spheres: tuple = ()
    eps_z: float = 0.1
    s_floor: float = 0.2
    flatness_scales: tuple = ()
    defect_points: int = 3
    mono_slack: float = 0.05
    sphere_radius: float = 0.3
    cap_margin: float = 0.15
    residual_trials: int = 5


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment = Experiment.CUSTOM
    cone: ConeParams = field(default_factory=ConeParams)
    grid: GridSpec = field(default_factory=GridSpec)
    boundary: BoundarySpec = field(default_factory=BoundarySpec)
    solver: SolverOptions = field(default_factory=SolverOptions)
    init_file: str = ""
    diagnostics: DiagnosticsSpec = field(default_factory=DiagnosticsSpec)
    output: OutputSpec = field(default_factory=OutputSpec)


# ---------------------------------------------------------------- value codecs

def _fmt_float(x: float) -> str:
    return repr(float(x))


def _parse_float(t: str) -> float:
    v = float(t)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _parse_bool(t: str) -> bool:
    low = t.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {t!r}")


def _parse_vec(t: str, n: int = 3) -> tuple:
    parts = [p for p in t.split(",") if p.strip()]
    if len(parts) != n:
        raise ValueError(f"expected {n} comma-separated numbers")
    return tuple(_parse_float(p) for p in parts)


def _fmt_vec(v) -> str:
    return ",".join(_fmt_float(x) for x in v)


def _parse_int_vec(t: str) -> tuple:
    parts = [p for p in t.split(",") if p.strip()]
    if len(parts) != 3:
        raise ValueError("expected 3 comma-separated integers")
    return tuple(int(p) for p in parts)


def _items(t: str):
    return [p.strip() for p in t.split(";") if p.strip()]


def _parse_floats(t: str) -> tuple:
    return tuple(_parse_float(p) for p in t.split(",") if p.strip())


def _parse_vecs(t: str) -> tuple:
    return tuple(_parse_vec(p) for p in _items(t))


def _parse_loops(t: str) -> tuple:
    out = []
    for p in _items(t):
        v = _parse_vec(p, 7)
        out.append(LoopRequest(v[:3], v[3:6], v[6]))
    return tuple(out)


def _parse_spheres(t: str) -> tuple:
    out = []
    for p in _items(t):
        v = _parse_vec(p, 4)
        out.append(SphereRequest(v[:3], v[3]))
    return tuple(out)


def _enum(cls):
    def parse(t):
        try:
            return cls(t.strip())
        except ValueError:
            raise ValueError(f"expected one of {[e.value for e in cls]}") from None
    return parse


def _choice(*names):
    def parse(t):
        t = t.strip()
        if t not in names:
            raise ValueError(f"expected one of {list(names)}")
        return t
    return parse


@dataclass(frozen=True)
class _Key:
    section: str                     # attribute of ExperimentConfig ('' for top level)
    attr: str
    parse: Callable[[str], Any]
    fmt: Callable[[Any], str]
    check: Optional[Callable[[Any], Optional[str]]] = None


def _positive(v):
    return None if v > 0 else "must be positive"


def _unit_open(v):
    return None if 0.0 < v < 1.0 else "must lie in (0, 1)"


def _nonneg(v):
    return None if v >= 0 else "must be nonnegative"


def _at_least(m):
    return lambda v: None if v >= m else f"must be at least {m}"


_str = str
_fmt_enum = lambda e: e.value  # noqa: E731
_fmt_floats = lambda v: ",".join(_fmt_float(x) for x in v)  # noqa: E731
_fmt_vecs = lambda v: "; ".join(_fmt_vec(x) for x in v)  # noqa: E731
_fmt_loops = lambda v: "; ".join(_fmt_vec(tuple(l.center) + tuple(l.normal) + (l.radius,)) for l in v)  # noqa: E731,E741
_fmt_spheres = lambda v: "; ".join(_fmt_vec(tuple(s.center) + (s.radius,)) for s in v)  # noqa: E731
_fmt_bool = lambda b: "true" if b else "false"  # noqa: E731

KEYS = {
    "experiment": _Key("", "experiment", _enum(Experiment), _fmt_enum),
    "cone.k": _Key("cone", "k", _parse_float, _fmt_float,
                   lambda v: None if v > 1.0 else "k > 1 required"),
    "cone.target_mode": _Key("cone", "target_mode", _enum(TargetMode), _fmt_enum),
    "grid.shape": _Key("grid", "shape", _choice("box", "ball", "cylinder"), _str),
    "grid.n": _Key("grid", "n", int, str, _at_least(3)),
    "grid.radius": _Key("grid", "radius", _parse_float, _fmt_float, _positive),
    "grid.height": _Key("grid", "height", _parse_float, _fmt_float, _positive),
    "grid.free_caps": _Key("grid", "free_caps", _parse_bool, _fmt_bool),
    "grid.dims": _Key("grid", "dims", _parse_int_vec, lambda v: ",".join(map(str, v)),
                      lambda v: None if min(v) >= 3 else "each dimension must be at least 3"),
    "grid.h": _Key("grid", "h", _parse_float, _fmt_float, _positive),
    "grid.origin": _Key("grid", "origin", _parse_vec, _fmt_vec),
    "boundary.generator": _Key("boundary", "generator",
                               _choice("planar_half_winding", "planar_radial", "hedgehog", "constant"), _str),
    "boundary.s0": _Key("boundary", "s0", _parse_float, _fmt_float, _positive),
    "boundary.vector": _Key("boundary", "vector", _parse_vec, _fmt_vec,
                            lambda v: None if any(x != 0 for x in v) else "must be nonzero"),
    "solver.max_iters": _Key("solver", "max_iters", int, str, _at_least(1)),
    "solver.grad_tol": _Key("solver", "grad_tol", _parse_float, _fmt_float, _positive),
    "solver.initial_step": _Key("solver", "initial_step", _parse_float, _fmt_float, _positive),
    "solver.shrink": _Key("solver", "shrink", _parse_float, _fmt_float, _unit_open),
    "solver.armijo_c": _Key("solver", "armijo_c", _parse_float, _fmt_float, _unit_open),
    "solver.seed": _Key("solver", "seed", int, str, _nonneg),
    "solver.init_mode": _Key("solver", "init_mode", _enum(InitMode), _fmt_enum),
    "solver.coarse_to_fine_levels": _Key("solver", "coarse_to_fine_levels", int, str, _at_least(1)),
    "solver.workers": _Key("solver", "workers", int, str, _at_least(1)),
    "solver.init_file": _Key("", "init_file", _str, _str),
    "diagnostics.centers": _Key("diagnostics", "centers", _parse_vecs, _fmt_vecs),
    "diagnostics.radii": _Key("diagnostics", "radii", _parse_floats, _fmt_floats,
                              lambda v: None if all(r > 0 for r in v) else "radii must be positive"),
    "diagnostics.loops": _Key("diagnostics", "loops", _parse_loops, _fmt_loops,
                              lambda v: None if all(l.radius > 0 and any(l.normal) for l in v)  # noqa: E741
                              else "loops need positive radius and nonzero normal"),
    "diagnostics.spheres": _Key("diagnostics", "spheres", _parse_spheres, _fmt_spheres,
                                lambda v: None if all(s.radius > 0 for s in v) else "radius must be positive"),
    "diagnostics.eps_z": _Key("diagnostics", "eps_z", _parse_float, _fmt_float, _unit_open),
    "diagnostics.s_floor": _Key("diagnostics", "s_floor", _parse_float, _fmt_float, _unit_open),
    "diagnostics.flatness_scales": _Key("diagnostics", "flatness_scales", _parse_floats, _fmt_floats,
                                        lambda v: None if all(r > 0 for r in v) else "scales must be positive"),
    "diagnostics.defect_points": _Key("diagnostics", "defect_points", int, str, _at_least(1)),
    "diagnostics.mono_slack": _Key("diagnostics", "mono_slack", _parse_float, _fmt_float, _nonneg),
    "diagnostics.sphere_radius": _Key("diagnostics", "sphere_radius", _parse_float, _fmt_float, _positive),
    "diagnostics.cap_margin": _Key("diagnostics", "cap_margin", _parse_float, _fmt_float, _nonneg),
    "diagnostics.residual_trials": _Key("diagnostics", "residual_trials", int, str, _at_least(0)),
    "output.dir": _Key("output", "dir", _str, _str),
}


def _section_defaults(experiment: Experiment) -> ExperimentConfig:
    """Documented defaults for each canned experiment."""
    if experiment is Experiment.LINE_DEFECT:
        return ExperimentConfig(
            experiment,
            ConeParams(4.0),
            GridSpec(shape="cylinder", n=48, radius=1.0, height=1.0, free_caps=True),
            BoundarySpec("planar_half_winding", 1.0),
            SolverOptions(max_iters=20000, grad_tol=1e-5, coarse_to_fine_levels=3),
            diagnostics=DiagnosticsSpec(),
            output=OutputSpec("out/line_defect"),
        )
    if experiment is Experiment.POINT_DEFECT_CK:
        return ExperimentConfig(
            experiment,
            ConeParams(4.0, TargetMode.CK_NO_QUOTIENT),
            GridSpec(shape="ball", n=48, radius=1.0),
            BoundarySpec("hedgehog", 1.0),
            SolverOptions(max_iters=20000, grad_tol=1e-5, coarse_to_fine_levels=3),
            diagnostics=DiagnosticsSpec(),
            output=OutputSpec("out/point_defect_ck"),
        )
    if experiment is Experiment.CYLINDER_ORACLE:
        return ExperimentConfig(
            experiment,
            ConeParams(4.0),
            GridSpec(shape="box", dims=(65, 65, 65), h=1.0 / 64.0, origin=(-0.5, -0.5, -0.5)),
            BoundarySpec("planar_half_winding", 1.0),
            diagnostics=DiagnosticsSpec(centers=((0.0, 0.0, 0.0),),
                                        radii=(0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4)),
            output=OutputSpec("out/cylinder_oracle"),
        )
    return ExperimentConfig(Experiment.CUSTOM)


def _get(cfg: ExperimentConfig, spec: _Key):
    obj = cfg if not spec.section else getattr(cfg, spec.section)
    return getattr(obj, spec.attr)


def flatten(cfg: ExperimentConfig) -> dict:
    return {key: _get(cfg, spec) for key, spec in KEYS.items()}


def _build(values: dict) -> ExperimentConfig:
    groups = {}
    for key, spec in KEYS.items():
        groups.setdefault(spec.section, {})[spec.attr] = values[key]
    top = groups.pop("")
    return ExperimentConfig(
        experiment=top["experiment"],
        init_file=top["init_file"],
        cone=ConeParams(**groups["cone"]),
        grid=GridSpec(**groups["grid"]),
        boundary=BoundarySpec(**groups["boundary"]),
        solver=SolverOptions(**groups["solver"]),
        diagnostics=DiagnosticsSpec(**groups["diagnostics"]),
        output=OutputSpec(**groups["output"]),
    )


def _tokenize(text: str):
    """Yield ``(line_no, key, raw_value)``; malformed lines as ``(line_no, None, line)``."""
    for no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            yield no, None, body
            continue
        key, _, val = body.partition("=")
        yield no, key.strip(), val.strip()


def build_domain(grid: GridSpec) -> GridDomain:
    if grid.shape == "cylinder":
        return cylinder_domain(grid.n, grid.radius, grid.height, free_caps=grid.free_caps)
    if grid.shape == "ball":
        return ball_domain(grid.n, grid.radius)
    return box_domain(tuple(grid.dims), grid.h, tuple(grid.origin))


def _inside(dom: GridDomain, p) -> bool:
    return dom.contains_ball(np.asarray(p, dtype=float), 0.0)


def _geometry_errors(cfg: ExperimentConfig, lines: dict):
    errs = []
    try:
        dom = build_domain(cfg.grid)
    except (ValueError, InvalidInputError) as exc:
        return [(lines.get("grid.shape", 0), "grid", str(exc))]
    diag = cfg.diagnostics
    for c in diag.centers:
        if not _inside(dom, c):
            errs.append((lines.get("diagnostics.centers", 0), "diagnostics.centers",
                         f"center {c} lies outside the domain"))
    from .defects import circle_loop
    for lp in diag.loops:
        pts = circle_loop(lp.center, lp.normal, lp.radius, 64).points
        if not all(_inside(dom, p) for p in pts):
            errs.append((lines.get("diagnostics.loops", 0), "diagnostics.loops",
                         f"loop about {lp.center} of radius {lp.radius} leaves the domain"))
    for sp in diag.spheres:
        if not dom.contains_ball(np.asarray(sp.center), sp.radius):
            errs.append((lines.get("diagnostics.spheres", 0), "diagnostics.spheres",
                         f"sphere about {sp.center} of radius {sp.radius} leaves the domain"))
    if cfg.experiment is Experiment.POINT_DEFECT_CK and cfg.cone.target_mode is not TargetMode.CK_NO_QUOTIENT:
        errs.append((lines.get("cone.target_mode", 0), "cone.target_mode",
                     "point_defect_ck requires Ck_no_quotient"))
    if cfg.solver.init_mode is InitMode.FROM_FILE and not cfg.init_file:
        errs.append((lines.get("solver.init_mode", 0), "solver.init_file",
                     "from_file initialisation needs solver.init_file"))
    return errs


def parse_config(text: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Parse and validate; raise ``ConfigError`` listing every problem.

    ``overrides`` maps dotted keys to raw string values and wins over the
    text (the CLI uses it for flags).
    """
    errors = []
    entries = []
    for no, key, val in _tokenize(text):
        if key is None:
            errors.append((no, val, "expected 'key = value'"))
        else:
            entries.append((no, key, val))
    for key, val in (overrides or {}).items():
        entries.append((0, key, str(val)))

    exp = Experiment.CUSTOM
    for no, key, val in entries:
        if key == "experiment":
            try:
                exp = KEYS["experiment"].parse(val)
            except ValueError as exc:
                errors.append((no, key, str(exc)))
    values = flatten(_section_defaults(exp))
    lines = {}
    for no, key, val in entries:
        spec = KEYS.get(key)
        if spec is None:
            errors.append((no, key, "unknown key"))
            continue
        try:
            value = spec.parse(val)
        except (ValueError, TypeError) as exc:
            errors.append((no, key, f"cannot parse {val!r}: {exc}"))
            continue
        msg = spec.check(value) if spec.check else None
        if msg:
            errors.append((no, key, msg))
            continue
        values[key] = value
        lines[key] = no
    cfg = None
    if not errors:
        try:
            cfg = _build(values)
        except InvalidInputError as exc:
            errors.append((0, "config", str(exc)))
    if not errors:
        errors.extend(_geometry_errors(cfg, lines))
    if errors:
        raise ConfigError(errors)
    return cfg


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text with every key; ``parse_config`` inverts it exactly."""
    out = []
    section = None
    for key, spec in KEYS.items():
        head = key.split(".")[0]
        if head != section and section is not None:
            out.append("")
        section = head
        out.append(f"{key} = {spec.fmt(_get(cfg, spec))}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- boundary data

def _axis_angle(coords):
    return np.arctan2(coords[..., 1], coords[..., 0]), np.hypot(coords[..., 0], coords[..., 1])


def boundary_values(spec: BoundarySpec, coords: np.ndarray) -> np.ndarray:
    """Evaluate the named boundary generator at ``coords`` (shape (..., 3)).

    ``planar_half_winding`` is ``s0 (cos(t/2), sin(t/2), 0)`` with ``t`` the
    polar angle about the x3 axis: its director winds by pi once around the
    axis.  ``planar_radial`` is ``s0 (x1, x2, 0) / |(x1, x2)|``.
    """
    coords = np.asarray(coords, dtype=float)
    out = np.zeros(coords.shape)
    s0 = spec.s0
    if spec.generator == "planar_half_winding":
        th, rho = _axis_angle(coords)
        out[..., 0] = np.cos(th / 2.0)
        out[..., 1] = np.sin(th / 2.0)
        out[rho < 1e-12] = 0.0
    elif spec.generator == "planar_radial":
        _, rho = _axis_angle(coords)
        safe = np.where(rho > 1e-12, rho, 1.0)
        out[..., 0] = np.where(rho > 1e-12, coords[..., 0] / safe, 0.0)
        out[..., 1] = np.where(rho > 1e-12, coords[..., 1] / safe, 0.0)
    elif spec.generator == "hedgehog":
        r = np.linalg.norm(coords, axis=-1)
        safe = np.where(r > 1e-12, r, 1.0)[..., None]
        out = np.where(r[..., None] > 1e-12, coords / safe, 0.0)
    elif spec.generator == "constant":
        v = np.asarray(spec.vector, dtype=float)
        out[...] = v / np.linalg.norm(v)
    else:
        raise InvalidInputError(f"unknown boundary generator {spec.generator!r}")
    return s0 * out
