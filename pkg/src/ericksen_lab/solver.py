"""Gradient descent with Armijo backtracking for the discrete cone energy."""

from __future__ import annotations

import enum
import logging
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import cg

from .cone import InvalidInputError
from .energy import energy_and_gradient, total_energy
from .grid import LineFieldState, _axis_slices
from .interp import sample_line_field

log = logging.getLogger(__name__)


class InitMode(str, enum.Enum):
    BOUNDARY_HARMONIC_FILL = "boundary_harmonic_fill"
    RANDOM = "random"
    FROM_FILE = "from_file"


@dataclass
class SolverOptions:
    max_iters: int = 20000
    grad_tol: float = 1e-6
    initial_step: float = 1.0
    shrink: float = 0.5
    armijo_c: float = 1e-4
    seed: int = 0
    init_mode: InitMode = InitMode.BOUNDARY_HARMONIC_FILL
    coarse_to_fine_levels: int = 1
    workers: int = 1

    def __post_init__(self):
        self.init_mode = InitMode(self.init_mode)
        errors = []
        if not 0.0 < self.shrink < 1.0:
            errors.append(f"shrink factor must lie in (0, 1), got {self.shrink}")
        if not self.grad_tol > 0.0:
            errors.append(f"grad_tol must be positive, got {self.grad_tol}")
        if self.max_iters < 0:
            errors.append("max_iters must be nonnegative")
        if not self.initial_step > 0.0:
            errors.append("initial_step must be positive")
        if not 0.0 < self.armijo_c < 1.0:
            errors.append("armijo_c must lie in (0, 1)")
        if self.coarse_to_fine_levels < 1:
            errors.append("coarse_to_fine_levels must be >= 1")
        if self.workers < 1:
            errors.append("workers must be >= 1")
        if errors:
            raise InvalidInputError("; ".join(errors))


@dataclass
class SolveReport:
    iterations: int
    final_energy: float
    final_rel_grad: float
    energy_trace: list = field(default_factory=list)
    wall_time: float = 0.0
    converged: bool = False
    max_interior_u: float = 0.0
    max_boundary_u: float = 0.0
    max_principle_ok: bool = True

    @property
    def monotone(self) -> bool:
        t = self.energy_trace
        return all(b <= a for a, b in zip(t, t[1:]))


def relative_gradient(grad, values, energy, h):
    """Scale-free gradient size ``|g| |w| / E``.

    Invariant under ``w -> lambda w`` and, for smooth fields, under grid
    refinement.  ``E`` is floored at ``h |w|^2 * 1e-30``.
    """
    gn = float(np.sqrt(np.sum(grad * grad)))
    wn = float(np.sqrt(np.sum(values * values)))
    denom = max(energy, 1e-30 * h * wn * wn, 1e-300)
    return gn * wn / denom


ENERGY_FLOOR = 1e-24


def _at_energy_floor(energy, values, h):
    # E >= 0, so an energy at round-off level of the natural scale h^3 |w|^2
    # is a global minimum even though |g| |w| / E is then meaningless.
    return energy <= ENERGY_FLOOR * h ** 3 * float(np.sum(values * values))


def _max_principle(state: LineFieldState):
    k = state.params.k
    s = state.s
    dom = state.domain
    mi = float(np.sqrt(k) * s[dom.interior].max()) if np.any(dom.interior) else 0.0
    mb = float(np.sqrt(k) * s[dom.boundary].max()) if np.any(dom.boundary) else 0.0
    return mi, mb, mi <= mb + 1e-9 * max(mb, 1.0)


def minimize(state: LineFieldState, options: Optional[SolverOptions] = None,
             callback: Optional[Callable] = None):
    """Minimise the discrete energy over interior nodes, boundary fixed.

    Returns ``(state, report)``.  The input state is not modified.  The
    initial step of each line search is the Barzilai-Borwein estimate from
    the previous accepted step (falling back to ``options.initial_step``);
    acceptance uses the Armijo condition so the energy trace never rises.
    """
    opts = options or SolverOptions()
    t0 = time.perf_counter()
    dom = state.domain
    x = state.values.copy()
    cur = state.with_values(x)
    E, g = energy_and_gradient(cur, opts.workers)
    trace = [E]
    step = opts.initial_step
    rel = relative_gradient(g, x, E, dom.h)
    it = 0
    converged = rel <= opts.grad_tol or _at_energy_floor(E, x, dom.h)
    prev_x = prev_g = None
    while not converged and it < opts.max_iters:
        if prev_x is not None:
            sv = x - prev_x
            yv = g - prev_g
            sy = float(np.sum(sv * yv))
            if sy > 0.0:
                step = float(np.sum(sv * sv)) / sy
            else:
                step = min(step * 2.0, 1e6)
        g2 = float(np.sum(g * g))
        accepted = False
        for _ in range(60):
            xn = x - step * g
            En = total_energy(cur.with_values(xn), opts.workers)
            if En <= E - opts.armijo_c * step * g2:
                accepted = True
                break
            step *= opts.shrink
        if not accepted:
            log.warning("line search failed at iteration %d", it)
            break
        prev_x, prev_g = x, g
        x = xn
        it += 1
        cur = state.with_values(x)
        E, g = energy_and_gradient(cur, opts.workers)
        trace.append(E)
        rel = relative_gradient(g, x, E, dom.h)
        if callback is not None:
            callback(it, E, rel)
        if rel <= opts.grad_tol or _at_energy_floor(E, x, dom.h):
            converged = True

    out = state.with_values(x)
    mi, mb, ok = _max_principle(out)
    if not ok:
        log.warning("maximum principle violated: interior |u| %.6g > boundary %.6g", mi, mb)
    if not converged:
        log.warning("solver stopped after %d iterations, rel grad %.3g", it, rel)
    report = SolveReport(
        iterations=it, final_energy=E, final_rel_grad=rel, energy_trace=trace,
        wall_time=time.perf_counter() - t0, converged=converged,
        max_interior_u=mi, max_boundary_u=mb, max_principle_ok=ok)
    return out, report


def align_boundary_signs(state: LineFieldState) -> np.ndarray:
    """Breadth-first sign alignment of boundary values over 26-neighbours.

    Returns a copy of ``state.values``; a class-1 boundary loop necessarily
    keeps one sign jump somewhere.
    """
    dom = state.domain
    values = state.values.copy()
    bnd = dom.boundary
    seen = np.zeros(dom.dims, dtype=bool)
    offsets = [(i, j, l) for i in (-1, 0, 1) for j in (-1, 0, 1) for l in (-1, 0, 1)
               if (i, j, l) != (0, 0, 0)]
    dims = dom.dims
    for start in zip(*np.nonzero(bnd)):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        while queue:
            p = queue.popleft()
            wp = values[p]
            for o in offsets:
                q = (p[0] + o[0], p[1] + o[1], p[2] + o[2])
                if not (0 <= q[0] < dims[0] and 0 <= q[1] < dims[1] and 0 <= q[2] < dims[2]):
                    continue
                if seen[q] or not bnd[q]:
                    continue
                if np.dot(values[q], wp) < 0.0:
                    values[q] = -values[q]
                seen[q] = True
                queue.append(q)
    return values


def _graph_laplacian(dom):
    n = int(np.prod(dom.dims))
    ids = np.arange(n).reshape(dom.dims)
    rows, cols = [], []
    for ax in range(3):
        lo, hi = _axis_slices(ax)
        m = dom.edge_masks[ax]
        rows.append(ids[lo][m])
        cols.append(ids[hi][m])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    ones = np.ones(len(r))
    A = coo_matrix((np.concatenate([-ones, -ones]), (np.concatenate([r, c]), np.concatenate([c, r]))),
                   shape=(n, n)).tocsr()
    deg = -np.asarray(A.sum(axis=1)).ravel()
    A = A + coo_matrix((deg, (np.arange(n), np.arange(n))), shape=(n, n)).tocsr()
    return A


def _harmonic_extend(dom, flat):
    """Discrete-harmonic extension of the columns of ``flat`` (shape
    ``(nodes, m)``) from boundary-fixed nodes into the interior."""
    A = _graph_laplacian(dom)
    free = dom.interior.ravel()
    fixed = dom.boundary.ravel()
    out = flat.copy()
    if not np.any(free):
        return out
    Aff = A[free][:, free]
    Afb = A[free][:, fixed]
    for c in range(flat.shape[1]):
        rhs = -Afb @ flat[fixed, c]
        sol, _ = cg(Aff, rhs, rtol=1e-10, maxiter=20000)
        out[free, c] = sol
    return out


def harmonic_fill(state: LineFieldState) -> LineFieldState:
    """Discrete-harmonic extension of the boundary data into the interior.

    In C_k mode the components of ``w`` are extended directly (after
    sign alignment, which is then a no-op for continuous data).  In D_k mode
    the sign-free tensor ``w w^T`` is extended instead and ``w`` is read
    back as ``sqrt(l1 - l2) v1`` from its top two eigenpairs, so that a
    class-1 boundary loop produces an interior zero rather than a sign cut
    pinned to the boundary.  Free faces act as Neumann boundaries.
    """
    dom = state.domain
    if not state.params.quotient:
        values = state.values.copy()
        values[dom.interior] = 0.0
        flat = _harmonic_extend(dom, values.reshape(-1, 3))
        return state.with_values(flat.reshape(values.shape))
    values = align_boundary_signs(state)
    values[dom.interior] = 0.0
    flat = values.reshape(-1, 3)
    iu = np.triu_indices(3)
    M = np.einsum("pi,pj->pij", flat, flat)[:, iu[0], iu[1]]
    M = _harmonic_extend(dom, M)
    free = dom.interior.ravel()
    T = np.zeros((int(free.sum()), 3, 3))
    T[:, iu[0], iu[1]] = M[free]
    T[:, iu[1], iu[0]] = M[free]
    lam, vec = np.linalg.eigh(T)
    gap = np.maximum(lam[:, 2] - lam[:, 1], 0.0)
    out = flat.copy()
    out[free] = np.sqrt(gap)[:, None] * vec[:, :, 2]
    return state.with_values(out.reshape(values.shape))


def random_fill(state: LineFieldState, seed: int) -> LineFieldState:
    """Interior values drawn uniformly in the ball of the boundary's max |w|."""
    rng = np.random.default_rng(seed)
    dom = state.domain
    scale = float(state.s[dom.boundary].max()) if np.any(dom.boundary) else 1.0
    values = state.values.copy()
    m = int(dom.interior.sum())
    v = rng.normal(size=(m, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    v *= scale * rng.uniform(size=(m, 1)) ** (1.0 / 3.0)
    values[dom.interior] = v
    return state.with_values(values)


def initialize(state: LineFieldState, options: SolverOptions) -> LineFieldState:
    if options.init_mode is InitMode.BOUNDARY_HARMONIC_FILL:
        return harmonic_fill(state)
    if options.init_mode is InitMode.RANDOM:
        return random_fill(state, options.seed)
    return state


def prolong(coarse: LineFieldState, fine: LineFieldState) -> LineFieldState:
    """Sign-aligned trilinear interpolation of ``coarse`` onto the interior
    nodes of ``fine``; fine boundary values are kept."""
    dom = fine.domain
    values = fine.values.copy()
    pts = dom.coords[dom.interior]
    values[dom.interior] = sample_line_field(coarse.domain, coarse.values, pts,
                                             quotient=coarse.params.quotient)
    return fine.with_values(values)


def coarse_to_fine(problem: Callable[[int], LineFieldState], n: int,
                   options: Optional[SolverOptions] = None):
    """Solve ``problem(n_level)`` on successively finer grids.

    ``problem(m)`` must return a state on an ``m``-node-wide grid with the
    boundary populated.  Level ``j`` (coarsest first) uses
    ``m = (n - 1) // 2**(levels-1-j) + 1`` nodes.  Returns
    ``(state, report, reports_per_level)``; the final report's wall time
    covers all levels.
    """
    opts = options or SolverOptions()
    levels = opts.coarse_to_fine_levels
    t0 = time.perf_counter()
    prev = None
    reports = []
    for j in range(levels):
        m = (n - 1) // 2 ** (levels - 1 - j) + 1
        st = problem(m)
        if prev is None:
            st = initialize(st, opts)
        else:
            st = prolong(prev, st)
        st, rep = minimize(st, opts)
        reports.append(rep)
        prev = st
    final = reports[-1]
    final.wall_time = time.perf_counter() - t0
    return prev, final, reports
