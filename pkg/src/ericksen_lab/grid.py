"""Regular 3D grids, node roles and the line-field state container."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .cone import ConeParams, InvalidInputError

EXTERIOR = 0
INTERIOR = 1
BOUNDARY = 2


class DomainShape(str, enum.Enum):
    BOX = "box"
    BALL = "ball"
    CYLINDER = "cylinder"


@dataclass
class GridDomain:
    """Uniform grid with per-node roles.

    ``roles[i, j, l]`` is one of ``EXTERIOR``, ``INTERIOR``, ``BOUNDARY``.
    Node ``(i, j, l)`` sits at ``origin + h * (i, j, l)``.  Edges join
    6-neighbours that are both non-exterior; a missing neighbour (off-grid)
    is a free boundary.
    """

    dims: tuple
    h: float
    origin: np.ndarray
    roles: np.ndarray
    shape: DomainShape = DomainShape.BOX

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        self.roles = np.asarray(self.roles, dtype=np.uint8)
        self.shape = DomainShape(self.shape)
        if any(d < 1 for d in self.dims):
            raise InvalidInputError(f"grid dims must be positive, got {self.dims}")
        if not (self.h > 0 and np.isfinite(self.h)):
            raise InvalidInputError(f"grid spacing must be positive, got {self.h}")
        if self.roles.shape != self.dims:
            raise InvalidInputError("roles array does not match dims")
        if np.any(self.roles > BOUNDARY):
            raise InvalidInputError("unknown node role")
        interior = self.roles == INTERIOR
        exterior = self.roles == EXTERIOR
        for axis in range(3):
            lo, hi = _axis_slices(axis)
            if np.any(interior[lo] & exterior[hi]) or np.any(interior[hi] & exterior[lo]):
                raise InvalidInputError("interior node adjacent to an exterior node")

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``dims + (3,)``."""
        axes = [self.origin[a] + self.h * np.arange(self.dims[a]) for a in range(3)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    @cached_property
    def edge_masks(self) -> tuple:
        active = self.roles != EXTERIOR
        masks = []
        for axis in range(3):
            lo, hi = _axis_slices(axis)
            masks.append(active[lo] & active[hi])
        return tuple(masks)

    @property
    def interior(self) -> np.ndarray:
        return self.roles == INTERIOR

    @property
    def boundary(self) -> np.ndarray:
        return self.roles == BOUNDARY

    @property
    def active(self) -> np.ndarray:
        return self.roles != EXTERIOR

    def index_of(self, point) -> np.ndarray:
        """Fractional grid index of a physical point."""
        return (np.asarray(point, dtype=float) - self.origin) / self.h

    def contains_ball(self, center, radius) -> bool:
        """True if every grid point within ``radius`` of ``center`` is active
        and the ball stays inside the grid's bounding box."""
        c = np.asarray(center, dtype=float)
        lo = self.origin
        hi = self.origin + self.h * (np.array(self.dims) - 1)
        if np.any(c - radius < lo - 1e-12) or np.any(c + radius > hi + 1e-12):
            return False
        idx_lo = np.maximum(np.floor((c - radius - lo) / self.h).astype(int), 0)
        idx_hi = np.minimum(np.ceil((c + radius - lo) / self.h).astype(int) + 1, self.dims)
        sub = tuple(slice(a, b) for a, b in zip(idx_lo, idx_hi))
        d = np.linalg.norm(self.coords[sub] - c, axis=-1)
        return bool(np.all(self.roles[sub][d <= radius + self.h] != EXTERIOR))

    def distance_to_boundary(self, point) -> float:
        """Distance from ``point`` to the nearest exterior node or grid face."""
        p = np.asarray(point, dtype=float)
        lo = self.origin
        hi = self.origin + self.h * (np.array(self.dims) - 1)
        dist = float(min(np.min(p - lo), np.min(hi - p)))
        ext = self.roles == EXTERIOR
        if np.any(ext):
            dist = min(dist, float(np.min(np.linalg.norm(self.coords[ext] - p, axis=-1))))
        return dist


def _axis_slices(axis):
    lo = [slice(None)] * 3
    hi = [slice(None)] * 3
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return tuple(lo), tuple(hi)


def _grid_axis(lo, hi, h):
    n = int(np.floor((hi - lo) / h + 1e-9)) + 1
    return n


def box_domain(dims: Sequence[int], h: float, origin=(0.0, 0.0, 0.0),
               free_axes: Sequence[int] = ()) -> GridDomain:
    """Box with the outer node layer fixed, except on faces normal to
    ``free_axes`` which are left as free (natural) boundaries."""
    dims = tuple(int(d) for d in dims)
    roles = np.full(dims, INTERIOR, dtype=np.uint8)
    for axis in range(3):
        if axis in free_axes:
            continue
        sl = [slice(None)] * 3
        sl[axis] = 0
        roles[tuple(sl)] = BOUNDARY
        sl[axis] = -1
        roles[tuple(sl)] = BOUNDARY
    return GridDomain(dims, h, origin, roles, DomainShape.BOX)


def _roles_from_mask(inside: np.ndarray, free_axes=()) -> np.ndarray:
    roles = np.where(inside, INTERIOR, EXTERIOR).astype(np.uint8)
    for axis in range(3):
        for shift in (1, -1):
            nb = np.roll(inside, shift, axis=axis)
            # off-grid neighbours: fixed unless this axis is free
            sl = [slice(None)] * 3
            sl[axis] = 0 if shift == 1 else -1
            nb[tuple(sl)] = axis in free_axes
            roles[inside & ~nb] = BOUNDARY
    return roles


def ball_domain(n: int, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> GridDomain:
    """Voxelised ball on an ``n^3`` grid whose outer nodes lie on the
    bounding cube of the ball.  Nodes inside the ball with a neighbour
    outside are boundary-fixed."""
    h = 2.0 * radius / (n - 1)
    origin = np.asarray(center, dtype=float) - radius
    dims = (n, n, n)
    axes = [origin[a] + h * np.arange(n) for a in range(3)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    inside = np.linalg.norm(X - np.asarray(center, dtype=float), axis=-1) <= radius + 1e-12
    return GridDomain(dims, h, origin, _roles_from_mask(inside), DomainShape.BALL)


def cylinder_domain(n: int, radius: float = 1.0, height: float = 1.0,
                    free_caps: bool = True) -> GridDomain:
    """Voxelised cylinder ``B^2_radius(0) x (0, height)`` with axis along x3.

    ``n`` nodes span the diameter; the x3 layers use the same spacing and
    start at 0.  With ``free_caps`` the top and bottom layers are left free.
    """
    h = 2.0 * radius / (n - 1)
    nz = _grid_axis(0.0, height, h)
    origin = np.array([-radius, -radius, 0.0])
    dims = (n, n, nz)
    axes = [origin[a] + h * np.arange(dims[a]) for a in range(3)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    inside = np.hypot(X[..., 0], X[..., 1]) <= radius + 1e-12
    roles = _roles_from_mask(inside, free_axes=(2,) if free_caps else ())
    return GridDomain(dims, h, origin, roles, DomainShape.CYLINDER)


@dataclass
class LineFieldState:
    """Grid field ``w`` (shape ``dims + (3,)``) with its cone parameters."""

    domain: GridDomain
    values: np.ndarray
    params: ConeParams = field(default_factory=ConeParams)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.domain.dims + (3,):
            raise InvalidInputError(
                f"values shape {self.values.shape} does not match grid {self.domain.dims}")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("non-finite field value")

    @property
    def s(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=-1)

    def copy(self) -> "LineFieldState":
        return LineFieldState(self.domain, self.values.copy(), self.params)

    def with_values(self, values) -> "LineFieldState":
        return LineFieldState(self.domain, values, self.params)


def sample_field(domain: GridDomain, fn: Callable[[np.ndarray], np.ndarray],
                 params: Optional[ConeParams] = None, where: Optional[np.ndarray] = None
                 ) -> LineFieldState:
    """Evaluate ``fn(coords) -> w`` on the active nodes (or on ``where``)."""
    mask = domain.active if where is None else where
    values = np.zeros(domain.dims + (3,))
    values[mask] = fn(domain.coords[mask])
    return LineFieldState(domain, values, params or ConeParams())
