"""Trilinear sampling of grid fields, sign-aligned for line fields."""

from __future__ import annotations

import numpy as np

from .grid import GridDomain

_CORNERS = np.array([[i, j, l] for i in (0, 1) for j in (0, 1) for l in (0, 1)])


def _stencil(domain: GridDomain, points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    f = domain.index_of(pts)
    dims = np.array(domain.dims)
    base = np.floor(f).astype(int)
    base = np.clip(base, 0, np.maximum(dims - 2, 0))
    t = f - base
    idx = base[:, None, :] + _CORNERS[None, :, :]
    idx = np.minimum(idx, dims - 1)
    wts = np.prod(np.where(_CORNERS[None, :, :] == 1, t[:, None, :], 1.0 - t[:, None, :]), axis=-1)
    return idx, wts


def _restrict_active(domain, idx, wts):
    active = domain.active[idx[..., 0], idx[..., 1], idx[..., 2]]
    wts = np.where(active, wts, 0.0)
    tot = wts.sum(axis=1, keepdims=True)
    # all weight on inactive corners (point on a voxelised curved boundary):
    # average the active corners of the cell instead
    thin = (tot[:, 0] <= 1e-12) & active.any(axis=1)
    wts[thin] = active[thin].astype(float)
    tot = wts.sum(axis=1, keepdims=True)
    ok = tot[:, 0] > 1e-12
    wts = np.divide(wts, tot, out=np.zeros_like(wts), where=tot > 1e-12)
    return wts, ok


def sample_scalar(domain: GridDomain, values: np.ndarray, points) -> np.ndarray:
    """Trilinear interpolation of a scalar grid array at ``points``.

    Exterior corners are dropped and the remaining weights renormalised.
    """
    idx, wts = _stencil(domain, points)
    wts, _ = _restrict_active(domain, idx, wts)
    v = values[idx[..., 0], idx[..., 1], idx[..., 2]]
    return np.sum(wts * v, axis=1)


def sample_line_field(domain: GridDomain, values: np.ndarray, points,
                      quotient: bool = True) -> np.ndarray:
    """Trilinear interpolation of ``w`` at ``points`` with the eight corner
    values sign-aligned to the corner of largest ``|w|`` (quotient mode)."""
    idx, wts = _stencil(domain, points)
    wts, _ = _restrict_active(domain, idx, wts)
    v = values[idx[..., 0], idx[..., 1], idx[..., 2]]  # (P, 8, 3)
    if quotient:
        norms = np.linalg.norm(v, axis=-1) * (wts > 0)
        ref = v[np.arange(len(v)), np.argmax(norms, axis=1)]
        sgn = np.where(np.einsum("pci,pi->pc", v, ref) < 0.0, -1.0, 1.0)
        v = v * sgn[..., None]
    return np.einsum("pc,pci->pi", wts, v)
