"""Closed-form 2D homogeneous minimiser and its cylindrical lift.

The unique (up to rotation and scale) non-constant homogeneous minimiser
from R^2 into D_k is the half-winding line field

    w(r, theta) = lam * r^alpha * (cos(theta/2 + phi0) e1 + sin(theta/2 + phi0) e2),

with ``alpha = 1 / (2 sqrt(k))``.  Its representative flips sign once per
turn; only the class ``[w]`` is 2 pi periodic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cone import ConeParams, InvalidInputError
from .grid import GridDomain, LineFieldState


class UndefinedQError(ValueError):
    """psi vanishes at a sample, so ``Q = psi . psi_theta / |psi|^2`` is undefined."""


@dataclass(frozen=True)
class Homogeneous2DMinimizer:
    k: float = 4.0
    amplitude: float = 1.0
    phase: float = 0.0
    frame: tuple = field(default=((1.0, 0.0, 0.0), (0.0, 1.0, 0.0)))

    def __post_init__(self):
        if self.k <= 1.0:
            raise InvalidInputError("k must exceed 1")
        if self.amplitude <= 0.0:
            raise InvalidInputError("amplitude must be positive")
        F = np.asarray(self.frame, dtype=float)
        if F.shape != (2, 3) or not np.allclose(F @ F.T, np.eye(2), atol=1e-12):
            raise InvalidInputError("frame must be an orthonormal pair in R^3")

    @property
    def alpha(self) -> float:
        return 1.0 / (2.0 * np.sqrt(self.k))


def eval_2d(m: Homogeneous2DMinimizer, r, theta) -> np.ndarray:
    """Representative ``w`` at polar coordinates ``(r, theta)``; shape ``(..., 3)``."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(r < 0):
        raise InvalidInputError("r must be nonnegative")
    e1, e2 = np.asarray(m.frame, dtype=float)
    s = m.amplitude * r ** m.alpha
    ang = theta / 2.0 + m.phase
    return s[..., None] * (np.cos(ang)[..., None] * e1 + np.sin(ang)[..., None] * e2)


def _periodic_aligned(psi):
    # neighbours of each sample, sign-aligned to it (handles the half-period flip)
    nxt = np.roll(psi, -1, axis=0)
    prv = np.roll(psi, 1, axis=0)
    sn = np.where(np.sum(psi * nxt, axis=1) < 0.0, -1.0, 1.0)[:, None]
    sp = np.where(np.sum(psi * prv, axis=1) < 0.0, -1.0, 1.0)[:, None]
    return sn * nxt, sp * prv


def el_residual_field(psi, k, alpha) -> np.ndarray:
    """Pointwise residual of

        psi'' + [k alpha^2 + (k-1) Q' + (k-1) Q^2] psi = 0,   Q = psi.psi' / |psi|^2,

    on a uniform periodic theta grid, second-order central differences."""
    psi = np.asarray(psi, dtype=float)
    n = len(psi)
    dth = 2.0 * np.pi / n
    norm2 = np.sum(psi * psi, axis=1)
    if np.any(norm2 <= 1e-300):
        raise UndefinedQError("psi vanishes on the sample set")
    nxt, prv = _periodic_aligned(psi)
    d1 = (nxt - prv) / (2.0 * dth)
    d2 = (nxt - 2.0 * psi + prv) / dth ** 2
    Q = np.sum(psi * d1, axis=1) / norm2
    dQ = (np.roll(Q, -1) - np.roll(Q, 1)) / (2.0 * dth)
    coef = k * alpha ** 2 + (k - 1.0) * dQ + (k - 1.0) * Q * Q
    return d2 + coef[:, None] * psi


def el_residual(psi, k, alpha) -> float:
    """Max-norm of the angular Euler-Lagrange residual."""
    return float(np.max(np.linalg.norm(el_residual_field(psi, k, alpha), axis=1)))


def sample_circle(m: Homogeneous2DMinimizer, n: int) -> np.ndarray:
    """``psi(theta) = w(1, theta)`` on ``n`` uniform samples of [0, 2 pi)."""
    theta = 2.0 * np.pi * np.arange(n) / n
    return eval_2d(m, np.ones(n), theta)


def hopf_differential(values, h, k, scheme: str = "forward") -> np.ndarray:
    """Hopf differential ``(|u_x|^2 - |u_y|^2) + 2 (u_x . u_y) i`` of a planar
    slice ``values`` (shape ``(nx, ny, 3)``) of the embedded field.

    ``scheme='forward'`` uses one-sided differences along the grid edges
    (the stencil of the discrete energy); ``'central'`` uses centred ones.
    Neighbours are sign-aligned to the base node.  NaN where the stencil
    leaves the grid.
    """
    w = np.asarray(values, dtype=float)
    if w.ndim != 3 or w.shape[-1] != 3:
        raise ValueError("expected a planar field of shape (nx, ny, 3)")
    s = np.linalg.norm(w, axis=-1)
    ck = np.sqrt(k - 1.0)
    nx, ny = w.shape[:2]
    grads = []
    valid = np.ones((nx, ny), dtype=bool)
    for axis in (0, 1):
        if scheme == "forward":
            fwd = np.roll(w, -1, axis=axis)
            sg = np.where(np.sum(fwd * w, axis=-1) < 0.0, -1.0, 1.0)[..., None]
            dw = (sg * fwd - w) / h
            ds = (np.roll(s, -1, axis=axis) - s) / h
            edge = np.ones((nx, ny), dtype=bool)
            if axis == 0:
                edge[-1, :] = False
            else:
                edge[:, -1] = False
        elif scheme == "central":
            fwd = np.roll(w, -1, axis=axis)
            bwd = np.roll(w, 1, axis=axis)
            sf = np.where(np.sum(fwd * w, axis=-1) < 0.0, -1.0, 1.0)[..., None]
            sb = np.where(np.sum(bwd * w, axis=-1) < 0.0, -1.0, 1.0)[..., None]
            dw = (sf * fwd - sb * bwd) / (2.0 * h)
            ds = (np.roll(s, -1, axis=axis) - np.roll(s, 1, axis=axis)) / (2.0 * h)
            edge = np.ones((nx, ny), dtype=bool)
            if axis == 0:
                edge[[0, -1], :] = False
            else:
                edge[:, [0, -1]] = False
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        grads.append(np.concatenate([ck * ds[..., None], dw], axis=-1))
        valid &= edge
    ux, uy = grads
    om = (np.sum(ux * ux, -1) - np.sum(uy * uy, -1)) + 2j * np.sum(ux * uy, -1)
    return np.where(valid, om, np.nan + 0j)


def planar_grid(m: Homogeneous2DMinimizer, h: float, half_width: float = 1.0):
    """Sample ``m`` on the square ``[-half_width, half_width]^2`` with spacing
    ``h``; returns ``(values, X, Y)``."""
    n = int(round(2.0 * half_width / h)) + 1
    x = -half_width + h * np.arange(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return eval_2d(m, np.hypot(X, Y), np.arctan2(Y, X)), X, Y


def _plane_frame(axis):
    a = np.asarray(axis, dtype=float)
    n = np.linalg.norm(a)
    if not np.isfinite(n) or abs(n - 1.0) > 1e-9:
        raise InvalidInputError("axis must be a unit vector")
    if np.allclose(a, [0.0, 0.0, 1.0]):
        return np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    helper = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    b1 = helper - a * np.dot(helper, a)
    b1 /= np.linalg.norm(b1)
    return b1, np.cross(a, b1)


def lift_cylinder(m: Homogeneous2DMinimizer, domain: GridDomain, axis=(0.0, 0.0, 1.0),
                  point=(0.0, 0.0, 0.0), params: ConeParams = None) -> LineFieldState:
    """Evaluate ``m`` at the projection of every active node onto the plane
    through ``point`` orthogonal to ``axis``.  The result is constant along
    the axis and homogeneous of degree alpha about every axis point."""
    b1, b2 = _plane_frame(axis)
    rel = domain.coords - np.asarray(point, dtype=float)
    x1 = rel @ b1
    x2 = rel @ b2
    values = eval_2d(m, np.hypot(x1, x2), np.arctan2(x2, x1))
    values[~domain.active] = 0.0
    return LineFieldState(domain, values, params or ConeParams(m.k))

