"""Defect (zero) set extraction, Z_2 loop classes and curve structure.

The zero set is resolved at grid scale.  A node is a defect voxel if its
order ``s`` falls below ``eps_z * s_ref`` or if it is a corner of a
*topological core*: in D_k mode a plaquette whose edge signs multiply to
-1 (a class-1 loop, which forces a zero inside any spanning disk), in C_k
mode a cell whose corner directions have nonzero S^2 degree.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .frequency import DomainError
from .grid import LineFieldState
from .interp import sample_line_field

log = logging.getLogger(__name__)

AMBIGUITY = 1e-6


class DegenerateFieldError(ValueError):
    """The reference order ``s_ref`` vanishes."""


class ClassUndefinedError(ValueError):
    """The order parameter drops below the floor on the loop."""


class AmbiguousLoopError(ValueError):
    """Two consecutive loop samples are (nearly) orthogonal."""


class FlatnessUndefinedError(ValueError):
    """No component point inside the test ball."""


@dataclass
class ZeroSet:
    mask: np.ndarray
    labels: np.ndarray
    n_components: int
    s_ref: float
    threshold_mask: np.ndarray
    core_mask: np.ndarray


@dataclass
class LoopSpec:
    points: np.ndarray
    spacing: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 3 or len(self.points) < 4:
            raise ValueError("loop needs at least 4 points in R^3")
        if not np.allclose(self.points[0], self.points[-1]):
            raise ValueError("loop must be closed (first point equals last)")


@dataclass
class Component:
    voxels: np.ndarray          # (m, 3) integer node indices
    points: np.ndarray          # (m, 3) coordinates
    polyline: np.ndarray        # (q, 3) ordered centreline
    endpoints: np.ndarray       # (2, 3)
    diameter: float
    label: str = "unclassified"
    class_samples: list = field(default_factory=list)
    flatness: list = field(default_factory=list)    # (b index, r, eps)
    junctions: list = field(default_factory=list)

    @property
    def voxel_count(self) -> int:
        return len(self.voxels)


@dataclass
class DefectGraph:
    components: list
    h: float
    s_ref: float
    isolated_candidates: list = field(default_factory=list)
    junctions: list = field(default_factory=list)
    separations: dict = field(default_factory=dict)

    def labels(self):
        return [c.label for c in self.components]


def reference_order(state: LineFieldState) -> float:
    """Median of ``s`` over the boundary-fixed nodes."""
    b = state.domain.boundary
    if not np.any(b):
        raise DegenerateFieldError("no boundary-fixed nodes to normalise against")
    s_ref = float(np.median(state.s[b]))
    if s_ref <= 0.0:
        raise DegenerateFieldError("boundary order parameter vanishes")
    return s_ref


def _shifted(dims, offsets):
    # slice selecting nodes p + offset for plaquette/cell origins p
    return tuple(slice(offsets[ax], dims[ax] - 1 + offsets[ax]) if ax in offsets else slice(None)
                 for ax in range(3))


def plaquette_classes(values, active):
    """Z_2 holonomy of every unit plaquette.

    Returns a list of ``(axes, class1, ambiguous)`` for the three plaquette
    orientations; arrays are indexed by the plaquette's lowest corner.
    """
    out = []
    dims = values.shape[:3]
    for a, b in ((0, 1), (0, 2), (1, 2)):
        sl = lambda da, db: _shifted(dims, {a: da, b: db})  # noqa: E731
        corners = [sl(0, 0), sl(1, 0), sl(1, 1), sl(0, 1)]
        W = [values[c] for c in corners]
        act = np.logical_and.reduce([active[c] for c in corners])
        neg = np.zeros(act.shape, dtype=bool)
        amb = np.zeros(act.shape, dtype=bool)
        for i in range(4):
            p, q = W[i], W[(i + 1) % 4]
            d = np.sum(p * q, axis=-1)
            scale = np.linalg.norm(p, axis=-1) * np.linalg.norm(q, axis=-1)
            amb |= np.abs(d) <= AMBIGUITY * scale
            neg ^= d < 0.0
        out.append(((a, b), neg & act & ~amb, amb & act))
    return out


# unit-cube faces, outward oriented, as corner offsets
_FACES = [
    [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)],
    [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],
    [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)],
    [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)],
    [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)],
    [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
]


def _solid_angle(a, b, c):
    num = np.einsum("...i,...i->...", a, np.cross(b, c))
    den = 1.0 + np.einsum("...i,...i->...", a, b) + np.einsum("...i,...i->...", b, c) \
        + np.einsum("...i,...i->...", c, a)
    return 2.0 * np.arctan2(num, den)


def cell_degrees(values, active) -> np.ndarray:
    """S^2 degree of ``w/|w|`` over the boundary of every grid cell.

    Cells with an inactive or zero corner get degree 0.
    """
    nx, ny, nz = values.shape[:3]
    norm = np.linalg.norm(values, axis=-1)
    unit = np.divide(values, norm[..., None], out=np.zeros_like(values), where=norm[..., None] > 0)
    good = active & (norm > 0)

    def corner(o):
        return (slice(o[0], nx - 1 + o[0]), slice(o[1], ny - 1 + o[1]), slice(o[2], nz - 1 + o[2]))

    total = np.zeros((nx - 1, ny - 1, nz - 1))
    ok = np.ones_like(total, dtype=bool)
    for o in {c for f in _FACES for c in f}:
        ok &= good[corner(o)]
    for f in _FACES:
        c = [unit[corner(o)] for o in f]
        total += _solid_angle(c[0], c[1], c[2]) + _solid_angle(c[0], c[2], c[3])
    deg = np.rint(total / (4.0 * np.pi)).astype(int)
    return np.where(ok, deg, 0)


def extract_zero_set(state: LineFieldState, eps_z: float = 0.1, topological: bool = True) -> ZeroSet:
    """Defect voxels and their 26-connected components."""
    if not 0.0 < eps_z < 1.0:
        raise ValueError("eps_z must lie in (0, 1)")
    dom = state.domain
    s_ref = reference_order(state)
    thr = (state.s < eps_z * s_ref) & dom.active
    core = np.zeros(dom.dims, dtype=bool)
    if topological:
        if state.params.quotient:
            for (a, b), neg, _ in plaquette_classes(state.values, dom.active):
                for da in (0, 1):
                    for db in (0, 1):
                        core[_shifted(dom.dims, {a: da, b: db})] |= neg
        else:
            deg = cell_degrees(state.values, dom.active) != 0
            for i in (0, 1):
                for j in (0, 1):
                    for l in (0, 1):
                        core[i:dom.dims[0] - 1 + i, j:dom.dims[1] - 1 + j, l:dom.dims[2] - 1 + l] |= deg
    mask = thr | (core & dom.active)
    labels, n = ndimage.label(mask, structure=np.ones((3, 3, 3), dtype=int))
    return ZeroSet(mask, labels, int(n), s_ref, thr, core)


def circle_loop(center, normal, radius, n: int = 128) -> LoopSpec:
    """Closed circle of ``n`` segments in the plane through ``center``
    orthogonal to ``normal``."""
    c = np.asarray(center, dtype=float)
    nv = np.asarray(normal, dtype=float)
    nv = nv / np.linalg.norm(nv)
    helper = np.array([1.0, 0.0, 0.0]) if abs(nv[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = helper - nv * np.dot(helper, nv)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(nv, e1)
    t = 2.0 * np.pi * np.arange(n + 1) / n
    t[-1] = 0.0
    pts = c + radius * (np.cos(t)[:, None] * e1 + np.sin(t)[:, None] * e2)
    return LoopSpec(pts, 2.0 * np.pi * radius / n)


def loop_class(state: LineFieldState, loop: LoopSpec, s_floor: float = 0.2,
               s_ref: Optional[float] = None) -> int:
    """Class in pi_1(RP^2) = Z_2 of the director along a closed loop.

    The class is 1 iff the product of ``sign(w_i . w_{i+1})`` over
    consecutive samples is -1.  Sampling is sign-aligned trilinear.
    """
    s_ref = reference_order(state) if s_ref is None else s_ref
    w = sample_line_field(state.domain, state.values, loop.points, quotient=True)
    s = np.linalg.norm(w, axis=1)
    if np.any(s < s_floor * s_ref):
        raise ClassUndefinedError(
            f"order drops to {s.min():.3g} < {s_floor} * s_ref on the loop")
    return _sign_class(w)


def _sign_class(w) -> int:
    d = np.sum(w[:-1] * w[1:], axis=1)
    scale = np.linalg.norm(w[:-1], axis=1) * np.linalg.norm(w[1:], axis=1)
    if np.any(np.abs(d) < AMBIGUITY * scale):
        raise AmbiguousLoopError("consecutive loop samples are orthogonal; refine the loop")
    return int(np.count_nonzero(d < 0.0) % 2)


def _principal_axis(P):
    c = P.mean(axis=0)
    if len(P) < 2:
        return c, np.array([0.0, 0.0, 1.0])
    _, _, Vt = np.linalg.svd(P - c, full_matrices=False)
    return c, Vt[0]


def centerline(points, h, window: float = 3.0) -> np.ndarray:
    """Centroids of ``points`` in sliding windows of width ``window * h``
    along the principal axis, stepped by ``h``."""
    P = np.asarray(points, dtype=float)
    c, d = _principal_axis(P)
    if d[np.argmax(np.abs(d))] < 0:
        d = -d
    t = (P - c) @ d
    half = 0.5 * window * h
    t0, t1 = t.min(), t.max()
    stations = np.arange(t0, t1 + 0.5 * h, h)
    out = []
    for tc in stations:
        # symmetric window, narrowed at the ends so end centroids are unbiased
        w = min(half, tc - t0, t1 - tc) if t1 - t0 > 2 * half else half
        sel = np.abs(t - tc) <= w + 1e-12
        if np.any(sel):
            q = P[sel].mean(axis=0)
            if not out or np.linalg.norm(q - out[-1]) > 1e-9:
                out.append(q)
    return np.array(out).reshape(-1, 3)


def _diameter(P):
    if len(P) < 2:
        return 0.0
    if len(P) > 3000:
        from scipy.spatial import ConvexHull
        try:
            P = P[ConvexHull(P).vertices]
        except Exception:
            pass
    diff = P[:, None, :] - P[None, :, :]
    return float(np.sqrt(np.max(np.sum(diff * diff, axis=-1))))


def build_defect_graph(state: LineFieldState, zero_set: ZeroSet,
                       junction_radius: float = 2.0) -> DefectGraph:
    """Components ordered by their lexicographically smallest voxel."""
    dom = state.domain
    comps = []
    for lab in range(1, zero_set.n_components + 1):
        vox = np.argwhere(zero_set.labels == lab)
        comps.append(vox)
    comps.sort(key=lambda v: tuple(v[0]))
    out = []
    for vox in comps:
        pts = dom.coords[vox[:, 0], vox[:, 1], vox[:, 2]]
        poly = centerline(pts, dom.h)
        ends = np.array([poly[0], poly[-1]])
        out.append(Component(vox, pts, poly, ends, _diameter(pts)))
    g = DefectGraph(out, dom.h, zero_set.s_ref)
    for c in out:
        c.junctions = find_junctions(c, dom.h, junction_radius)
        g.junctions.extend(c.junctions)
    return g


def _branch_count(S, h) -> int:
    pairs = cKDTree(S).query_pairs(np.sqrt(3.0) * h * 1.01, output_type="ndarray")
    n = len(S)
    A = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) \
        if len(pairs) else coo_matrix((n, n))
    return connected_components(A, directed=False)[0]


def find_junctions(comp: Component, h: float, radius: float = 2.0) -> list:
    """Points where the component splits into >= 3 branches in the shell
    ``radius*h < |x - p| <= (radius + 1.5)*h``.

    Every voxel is probed; hits within ``(radius + 1.5) h`` of each other
    are merged into one junction at their centroid.
    """
    P = comp.points
    if len(P) < 4:
        return []
    tree = cKDTree(P)
    hits = []
    outer = (radius + 1.5) * h
    for p in P:
        idx = tree.query_ball_point(p, outer)
        shell = [i for i in idx if np.linalg.norm(P[i] - p) > radius * h]
        if len(shell) >= 3 and _branch_count(P[shell], h) >= 3:
            hits.append(p)
    if not hits:
        return []
    H = np.array(hits)
    pairs = cKDTree(H).query_pairs(outer, output_type="ndarray")
    n = len(H)
    A = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) \
        if len(pairs) else coo_matrix((n, n))
    _, lab = connected_components(A, directed=False)
    return [H[lab == j].mean(axis=0) for j in range(lab.max() + 1)]


def densify(polyline, step) -> np.ndarray:
    """Resample a polyline with spacing at most ``step``."""
    P = np.asarray(polyline, dtype=float)
    if len(P) < 2:
        return P
    out = [P[0]]
    for a, b in zip(P[:-1], P[1:]):
        m = max(1, int(np.ceil(np.linalg.norm(b - a) / step)))
        t = np.arange(1, m + 1) / m
        out.extend(a + t[:, None] * (b - a))
    return np.array(out)


def reifenberg_flatness(P, b, r, within: Optional[Callable] = None, n_samples: int = 201) -> float:
    """Bilateral relative deviation of ``P`` from its best line in ``B_r(b)``.

    ``L`` is the principal line through the centroid of ``P n B_r(b)``;
    the result is ``max(sup_{p in P n B} dist(p, L), sup_{q in L n B}
    dist(q, P)) / r``.  ``within`` optionally restricts the samples of
    ``L`` (e.g. to the computational domain).
    """
    P = np.asarray(P, dtype=float)
    b = np.asarray(b, dtype=float)
    inside = P[np.linalg.norm(P - b, axis=1) <= r]
    if len(inside) == 0:
        raise FlatnessUndefinedError("no points inside the ball")
    c, d = _principal_axis(inside)
    rel = inside - c
    dev1 = np.linalg.norm(rel - np.outer(rel @ d, d), axis=1).max()
    # chord of L inside B_r(b)
    off = c - b
    bq = float(off @ d)
    disc = bq * bq - (float(off @ off) - r * r)
    if disc < 0:
        return float(dev1 / r)
    t0, t1 = -bq - np.sqrt(disc), -bq + np.sqrt(disc)
    q = c + np.linspace(t0, t1, n_samples)[:, None] * d
    if within is not None:
        q = q[np.array([bool(within(x)) for x in q], dtype=bool)] if len(q) else q
    dev2 = cKDTree(P).query(q)[0].max() if len(q) else 0.0
    return float(max(dev1, dev2) / r)


def _tangents(poly):
    if len(poly) < 2:
        return np.tile([0.0, 0.0, 1.0], (len(poly), 1))
    t = np.gradient(poly, axis=0)
    n = np.linalg.norm(t, axis=1, keepdims=True)
    return t / np.where(n > 0, n, 1.0)


def domain_predicate(state: LineFieldState) -> Callable:
    """True for points inside the bounding box whose nearest node is active."""
    dom = state.domain
    dims = np.array(dom.dims)

    def inside(x):
        f = dom.index_of(np.asarray(x, dtype=float)[None])[0]
        if np.any(f < -1e-9) or np.any(f > dims - 1 + 1e-9):
            return False
        i, j, l = np.clip(np.rint(f).astype(int), 0, dims - 1)
        return bool(dom.active[i, j, l])
    return inside


def classify_components(state: LineFieldState, graph: DefectGraph, scales: Sequence[float],
                        loop_radius: Optional[float] = None, s_floor: float = 0.2,
                        station_fraction: float = 0.9, flat_tol: float = 0.3,
                        isolated_diameter: float = 3.0, min_boundary_distance: float = 0.0
                        ) -> DefectGraph:
    """Label components ``curve``, ``isolated`` or ``ambiguous``.

    Curve-like: Z_2 class 1 on circles of radius ``loop_radius`` (default
    3h) about the centreline at >= ``station_fraction`` of the stations,
    and flatness <= ``flat_tol`` at every tested station and scale.
    Isolated candidate: diameter <= ``isolated_diameter * h`` and all
    surrounding loops (three orthogonal circles) of class 0.
    """
    h = graph.h
    rho = 3.0 * h if loop_radius is None else loop_radius
    within = domain_predicate(state)
    s_ref = graph.s_ref
    for comp in graph.components:
        if comp.diameter <= isolated_diameter * h:
            centre = comp.points.mean(axis=0)
            classes = []
            for nrm in np.eye(3):
                try:
                    classes.append(loop_class(state, circle_loop(centre, nrm, rho), s_floor, s_ref))
                except (ClassUndefinedError, AmbiguousLoopError):
                    classes.append(None)
            comp.class_samples = classes
            comp.label = "isolated" if all(c == 0 for c in classes) else "ambiguous"
            if comp.label == "isolated":
                graph.isolated_candidates.append(centre)
            continue
        poly = comp.polyline
        tang = _tangents(poly)
        classes = []
        for p, t in zip(poly, tang):
            try:
                classes.append(loop_class(state, circle_loop(p, t, rho), s_floor, s_ref))
            except (ClassUndefinedError, AmbiguousLoopError):
                classes.append(None)
        comp.class_samples = classes
        frac = np.mean([c == 1 for c in classes]) if classes else 0.0
        dense = densify(poly, 0.25 * h)
        flats = []
        for i, b in enumerate(poly):
            if min_boundary_distance > 0.0 and state.domain.distance_to_boundary(b) < min_boundary_distance:
                continue
            for r in scales:
                try:
                    flats.append((i, float(r), reifenberg_flatness(dense, b, r, within)))
                except FlatnessUndefinedError:
                    pass
        comp.flatness = flats
        flat_ok = bool(flats) and all(e <= flat_tol for _, _, e in flats)
        comp.label = "curve" if frac >= station_fraction and flat_ok else "ambiguous"
    curves = [i for i, c in enumerate(graph.components) if c.label == "curve"]
    for ii, i in enumerate(curves):
        for j in curves[ii + 1:]:
            d = cKDTree(graph.components[i].polyline).query(graph.components[j].polyline)[0].min()
            graph.separations[(i, j)] = float(d)
    return graph


@dataclass
class Crossing:
    point: np.ndarray
    component: int
    loop_class: Optional[int]
    transversal: bool


@dataclass
class ParityReport:
    center: np.ndarray
    radius: float
    crossings: list

    @property
    def n_class1(self) -> int:
        return sum(1 for c in self.crossings if c.loop_class == 1)

    @property
    def passed(self) -> bool:
        return self.n_class1 % 2 == 0 and all(c.loop_class is not None for c in self.crossings)


def sphere_crossings(polyline, center, radius):
    """Intersections of a polyline with a sphere, with segment directions."""
    P = np.asarray(polyline, dtype=float)
    c = np.asarray(center, dtype=float)
    out = []
    f = np.linalg.norm(P - c, axis=1) - radius
    for i in range(len(P) - 1):
        if f[i] == 0.0 or f[i] * f[i + 1] < 0.0:
            a, b = P[i], P[i + 1]
            d = b - a
            oa = a - c
            A = d @ d
            B = 2.0 * d @ oa
            C = oa @ oa - radius * radius
            disc = max(B * B - 4 * A * C, 0.0)
            roots = [(-B - np.sqrt(disc)) / (2 * A), (-B + np.sqrt(disc)) / (2 * A)]
            t = min((x for x in roots if -1e-12 <= x <= 1 + 1e-12), key=lambda x: abs(x - 0.5),
                    default=0.0)
            out.append((a + t * d, d / np.linalg.norm(d)))
    return out


def sphere_crossing_parity(state: LineFieldState, center, radius, graph: DefectGraph,
                           loop_radius: Optional[float] = None, s_floor: float = 0.2,
                           margin: float = 0.3) -> ParityReport:
    """Count defect-curve crossings of a sphere and their Z_2 classes.

    A small circle (radius ``loop_radius``, default 3h) in the sphere's
    tangent plane surrounds each crossing.  Passes iff the number of
    class-1 crossings is even.
    """
    c = np.asarray(center, dtype=float)
    if not state.domain.contains_ball(c, radius):
        raise DomainError(f"sphere of radius {radius} about {tuple(np.round(c, 6))} leaves the domain")
    rho = 3.0 * graph.h if loop_radius is None else loop_radius
    crossings = []
    for ci, comp in enumerate(graph.components):
        for p, d in sphere_crossings(comp.polyline, c, radius):
            nrm = (p - c) / np.linalg.norm(p - c)
            transversal = abs(float(d @ nrm)) >= margin
            if not transversal:
                warnings.warn(f"tangential crossing at {np.round(p, 4)}", RuntimeWarning)
            try:
                cls = loop_class(state, circle_loop(p, nrm, rho), s_floor, graph.s_ref)
            except (ClassUndefinedError, AmbiguousLoopError):
                cls = None
            crossings.append(Crossing(p, ci, cls, transversal))
    return ParityReport(c, float(radius), crossings)
