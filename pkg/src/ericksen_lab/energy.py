"""Discrete Dirichlet energy of cone-valued grid maps.

Each axis-aligned edge ``(i, j)`` between active nodes contributes
``h^3 * d^2(w_i, w_j) / h^2`` where ``d`` is the cone's chordal edge
distance.  The minimising sign of every edge is re-evaluated on each call.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .grid import LineFieldState, _axis_slices

# nodes with |w| below VERTEX_REL * (max boundary |w|) count as the cone
# vertex: their s-direction is undefined and the s-term derivative is 0
VERTEX_REL = 1e-14
VERTEX_EPS = 1e-300


def vertex_threshold(state: LineFieldState) -> float:
    dom = state.domain
    ref = dom.boundary if np.any(dom.boundary) else dom.active
    s = np.sqrt(np.einsum("...i,...i->...", state.values[ref], state.values[ref]))
    return max(VERTEX_REL * float(s.max(initial=0.0)), VERTEX_EPS)


def _axis_terms(values, mask, k, quotient, axis, want_grad, eps):
    # full-slice evaluation, masked afterwards; avoids fancy-index copies
    lo, hi = _axis_slices(axis)
    a = values[lo]
    b = values[hi]
    na = np.sqrt(np.einsum("...i,...i->...", a, a))
    nb = np.sqrt(np.einsum("...i,...i->...", b, b))
    if quotient:
        sigma = np.where(np.einsum("...i,...i->...", a, b) < 0.0, -1.0, 1.0)[..., None]
        diff = a - sigma * b
    else:
        sigma = 1.0
        diff = a - b
    ds = na - nb
    d2 = (k - 1.0) * ds * ds + np.einsum("...i,...i->...", diff, diff)
    d2 = np.where(mask, d2, 0.0)
    if not want_grad:
        return d2, None, None
    ds = np.where(mask, (k - 1.0) * ds, 0.0)[..., None]
    diff = diff * mask[..., None]
    ua = np.divide(a, na[..., None], out=np.zeros_like(a), where=na[..., None] > eps)
    ub = np.divide(b, nb[..., None], out=np.zeros_like(b), where=nb[..., None] > eps)
    ga = 2.0 * (ds * ua + diff)
    gb = 2.0 * (-ds * ub - sigma * diff)
    return d2, ga, gb


def _evaluate(state: LineFieldState, want_grad: bool, workers: int = 1):
    dom = state.domain
    p = state.params
    values = state.values
    masks = dom.edge_masks
    eps = vertex_threshold(state) if want_grad else VERTEX_EPS
    jobs = [(values, masks[ax], p.k, p.quotient, ax, want_grad, eps) for ax in range(3)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, 3)) as ex:
            results = list(ex.map(lambda j: _axis_terms(*j), jobs))
    else:
        results = [_axis_terms(*j) for j in jobs]

    # fixed-order reduction: per-axis pairwise sums, then x, y, z
    energy = 0.0
    for d2, _, _ in results:
        energy += float(np.sum(d2))
    energy *= dom.h

    grad = None
    if want_grad:
        grad = np.zeros_like(values)
        for ax, (_, ga, gb) in enumerate(results):
            lo, hi = _axis_slices(ax)
            grad[lo] += ga
            grad[hi] += gb
        grad *= dom.h

    if p.potential is not None:
        act = dom.active
        s = np.linalg.norm(values[act], axis=-1)
        energy += dom.h ** 3 * float(np.sum(p.potential.value(s)))
        if want_grad:
            dpsi = p.potential.derivative(s)
            unit = np.divide(values[act], s[:, None], out=np.zeros_like(values[act]),
                             where=s[:, None] > eps)
            grad[act] += dom.h ** 3 * dpsi[:, None] * unit

    if want_grad:
        grad[~dom.interior] = 0.0
    return energy, grad


def total_energy(state: LineFieldState, workers: int = 1) -> float:
    """Discrete energy of ``state``."""
    return _evaluate(state, False, workers)[0]


def energy_and_gradient(state: LineFieldState, workers: int = 1):
    """Energy and its gradient with respect to the interior node values.

    The gradient is an array shaped like ``state.values`` and is zero on
    boundary-fixed and exterior nodes.
    """
    return _evaluate(state, True, workers)


def energy_gradient(state: LineFieldState, workers: int = 1) -> np.ndarray:
    return _evaluate(state, True, workers)[1]


def radial_variation_residual(state: LineFieldState, phi: np.ndarray) -> float:
    """Derivative of the energy along ``w -> (1 + t phi) w`` at ``t = 0``.

    ``phi`` is a scalar grid array vanishing off the interior.  Vanishes for
    exact minimisers, since radial rescaling keeps the field in the cone.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != state.domain.dims:
        raise ValueError("phi must be a scalar grid array")
    if np.any(phi[~state.domain.interior] != 0.0):
        raise ValueError("phi must vanish off the interior nodes")
    g = energy_gradient(state)
    return float(np.sum(g * (phi[..., None] * state.values)))


def aligned_central_diff(values, axis, h, valid=None):
    """Central difference of the embedded-compatible field ``w`` along
    ``axis`` with neighbours sign-aligned to the centre node.

    Returns ``(dw, ds, ok)``: derivative of w, derivative of s = |w|, and the
    mask of nodes where both neighbours exist (and are valid).
    """
    n = values.shape[axis]
    dw = np.zeros_like(values)
    ds = np.zeros(values.shape[:-1])
    ok = np.zeros(values.shape[:-1], dtype=bool)
    if n < 3:
        return dw, ds, ok
    c = [slice(None)] * (values.ndim - 1)
    m = [slice(None)] * (values.ndim - 1)
    p = [slice(None)] * (values.ndim - 1)
    c[axis] = slice(1, -1)
    m[axis] = slice(None, -2)
    p[axis] = slice(2, None)
    c, m, p = tuple(c), tuple(m), tuple(p)
    wc, wm, wp = values[c], values[m], values[p]
    sm = np.where(np.sum(wc * wm, axis=-1) < 0.0, -1.0, 1.0)[..., None]
    sp = np.where(np.sum(wc * wp, axis=-1) < 0.0, -1.0, 1.0)[..., None]
    dw[c] = (sp * wp - sm * wm) / (2.0 * h)
    ds[c] = (np.linalg.norm(wp, axis=-1) - np.linalg.norm(wm, axis=-1)) / (2.0 * h)
    ok[c] = True
    if valid is not None:
        okc = valid[c] & valid[m] & valid[p]
        ok[c] &= okc
    return dw, ds, ok


def embedded_gradient(values, h, k, valid=None, quotient=True):
    """Sign-aligned central differences of ``u = (sqrt(k-1)|w|, w)``.

    Returns ``(grad_u, ok)`` with ``grad_u`` shaped ``values.shape[:-1] +
    (ndim, 4)`` and ``ok`` true where all axes were differentiable.
    """
    nd = values.ndim - 1
    grads = []
    ok = np.ones(values.shape[:-1], dtype=bool)
    for axis in range(nd):
        if quotient:
            dw, ds, oka = aligned_central_diff(values, axis, h, valid)
        else:
            dw, ds, oka = _plain_central_diff(values, axis, h, valid)
        grads.append(np.concatenate([np.sqrt(k - 1.0) * ds[..., None], dw], axis=-1))
        ok &= oka
    return np.stack(grads, axis=-2), ok


def _plain_central_diff(values, axis, h, valid=None):
    n = values.shape[axis]
    dw = np.zeros_like(values)
    ds = np.zeros(values.shape[:-1])
    ok = np.zeros(values.shape[:-1], dtype=bool)
    if n < 3:
        return dw, ds, ok
    c = [slice(None)] * (values.ndim - 1)
    m = [slice(None)] * (values.ndim - 1)
    p = [slice(None)] * (values.ndim - 1)
    c[axis], m[axis], p[axis] = slice(1, -1), slice(None, -2), slice(2, None)
    c, m, p = tuple(c), tuple(m), tuple(p)
    dw[c] = (values[p] - values[m]) / (2.0 * h)
    ds[c] = (np.linalg.norm(values[p], axis=-1) - np.linalg.norm(values[m], axis=-1)) / (2.0 * h)
    ok[c] = True
    if valid is not None:
        ok[c] &= valid[c] & valid[m] & valid[p]
    return dw, ds, ok


def stationarity_residual(state: LineFieldState) -> np.ndarray:
    """Pointwise norm of div(2 grad u (x) grad u - |grad u|^2 Id).

    Built from sign-aligned central differences of the embedded field.
    Returns NaN where the stencil leaves the active region.
    """
    dom = state.domain
    G, ok = embedded_gradient(state.values, dom.h, state.params.k,
                              valid=dom.active, quotient=state.params.quotient)
    # G[..., i, :] = d_i u
    gram = np.einsum("...ia,...ja->...ij", G, G)
    tr = np.trace(gram, axis1=-2, axis2=-1)
    T = 2.0 * gram - tr[..., None, None] * np.eye(3)
    div = np.zeros(dom.dims + (3,))
    ok_div = ok & dom.interior
    for j in range(3):
        c = [slice(None)] * 3
        m = [slice(None)] * 3
        p = [slice(None)] * 3
        c[j], m[j], p[j] = slice(1, -1), slice(None, -2), slice(2, None)
        c, m, p = tuple(c), tuple(m), tuple(p)
        dT = np.zeros(dom.dims + (3,))
        dT[c] = (T[p][..., :, j] - T[m][..., :, j]) / (2.0 * dom.h)
        div += dT
        okj = np.zeros(dom.dims, dtype=bool)
        okj[c] = ok[p] & ok[m]
        ok_div &= okj
    out = np.full(dom.dims, np.nan)
    out[ok_div] = np.linalg.norm(div[ok_div], axis=-1)
    return out
