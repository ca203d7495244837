"""Almgren-type monotone quantities about a centre.

For a ball ``B_r(a)``:

    D(a; r) = int_{B_r(a)} |grad u|^2          (Dirichlet energy)
    E(a; r) = r^{2-d} D(a; r)                  (renormalised, d = 3)
    H(a; r) = int_{dB_r(a)} |u|^2 dA           (boundary L^2 mass)
    N(a; r) = r D(a; r) / H(a; r)              (frequency)

``D`` is a voxel sum of the sign-aligned central-difference energy density
with linear partial-volume weights at the sphere; ``H`` uses a lat-long
midpoint rule on trilinearly interpolated ``|u|^2 = k |w|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .cone import edge_sq_distance
from .energy import embedded_gradient
from .grid import LineFieldState, ball_domain
from .interp import sample_line_field, sample_scalar

N_THETA = 32
N_PHI = 64
H_FLOOR = 1e-14


class FrequencyUndefinedError(ValueError):
    """H(a; r) is below the floor, so N(a; r) is not reported."""


class DegenerateBlowupError(ValueError):
    """The L^2 mass on B_r(a) vanishes."""


class DomainError(ValueError):
    """A requested ball leaves the active domain."""


@dataclass
class FrequencyProfile:
    center: np.ndarray
    radii: np.ndarray
    D: np.ndarray
    E: np.ndarray
    H: np.ndarray
    N: np.ndarray
    dropped: list = field(default_factory=list)

    def rows(self):
        return list(zip(self.radii, self.D, self.E, self.H, self.N))


@dataclass
class MonotoneReport:
    passed: bool
    violations: list
    slack: float


@dataclass
class DoublingReport:
    passed: bool
    H_r: float
    H_R: float
    N_r: float
    N_R: float
    lower: float
    upper: float
    tol: float

    @property
    def log2_ratio(self) -> float:
        return float(np.log2(self.H_R / self.H_r))


def energy_density(state: LineFieldState):
    """Nodewise ``|grad u|^2`` from sign-aligned central differences, with
    the mask of nodes where the stencil is complete."""
    dom = state.domain
    G, ok = embedded_gradient(state.values, dom.h, state.params.k, valid=dom.active,
                              quotient=state.params.quotient)
    return np.sum(G * G, axis=(-1, -2)), ok


def _ball_weights(state, a, r):
    dom = state.domain
    d = np.linalg.norm(dom.coords - np.asarray(a, dtype=float), axis=-1)
    return np.clip((r - d) / dom.h + 0.5, 0.0, 1.0)


def sphere_nodes(r, n_theta=N_THETA, n_phi=N_PHI):
    """Lat-long midpoint nodes on the sphere of radius ``r`` about 0 and
    their area weights (the weights sum to ``4 pi r^2`` up to O(dtheta^2))."""
    th = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    ph = np.arange(n_phi) * 2.0 * np.pi / n_phi
    T, P = np.meshgrid(th, ph, indexing="ij")
    dirs = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)
    wts = r * r * np.sin(T) * (np.pi / n_theta) * (2.0 * np.pi / n_phi)
    return r * dirs.reshape(-1, 3), wts.ravel()


def _check_ball(state, a, r):
    if not state.domain.contains_ball(a, r):
        raise DomainError(f"ball of radius {r} about {tuple(np.round(a, 6))} leaves the domain")


def _H(state, a, r, n_theta, n_phi):
    pts, wts = sphere_nodes(r, n_theta, n_phi)
    u2 = state.params.k * np.sum(state.values ** 2, axis=-1)
    vals = sample_scalar(state.domain, u2, pts + np.asarray(a, dtype=float))
    return float(np.sum(wts * vals))


def _field_scale(state):
    return float(state.params.k * np.max(np.sum(state.values ** 2, axis=-1)))


def frequency_quantities(state: LineFieldState, a, r, *, density=None,
                         n_theta=N_THETA, n_phi=N_PHI):
    """Return ``(D, E, H, N)`` at centre ``a`` and radius ``r``.

    ``density`` may pass a precomputed ``energy_density(state)``.
    """
    a = np.asarray(a, dtype=float)
    _check_ball(state, a, r)
    dens, ok = energy_density(state) if density is None else density
    wts = _ball_weights(state, a, r)
    if np.any((wts > 0) & ~ok):
        raise DomainError("energy density undefined inside the ball")
    D = float(np.sum(wts * np.where(ok, dens, 0.0))) * state.domain.h ** 3
    H = _H(state, a, r, n_theta, n_phi)
    if H < H_FLOOR * _field_scale(state) * 4.0 * np.pi * r * r or H <= 0.0:
        raise FrequencyUndefinedError(f"H({r}) = {H:.3g} below floor")
    E = D / r
    return D, E, H, r * D / H


def clamp_radii(state: LineFieldState, a, radii):
    """Split ``radii`` into those inside ``[4h, dist(a, boundary) - 2h]`` and
    the rest."""
    h = state.domain.h
    rmax = state.domain.distance_to_boundary(a) - 2.0 * h
    keep, drop = [], []
    for r in radii:
        (keep if 4.0 * h - 1e-12 <= r <= rmax + 1e-12 else drop).append(float(r))
    return keep, drop


def frequency_profile(state: LineFieldState, a, radii: Sequence[float], clamp=True,
                      n_theta=N_THETA, n_phi=N_PHI) -> FrequencyProfile:
    """Sample ``(D, E, H, N)`` at ascending radii.  Radii outside the
    trustworthy window (when ``clamp``) or with ``H`` below the floor are
    dropped and listed in ``profile.dropped``."""
    a = np.asarray(a, dtype=float)
    radii = sorted(float(r) for r in radii)
    dropped = []
    if clamp:
        radii, out = clamp_radii(state, a, radii)
        dropped += [(r, "outside [4h, dist - 2h]") for r in out]
    density = energy_density(state)
    rows = []
    for r in radii:
        try:
            rows.append((r,) + frequency_quantities(state, a, r, density=density,
                                                    n_theta=n_theta, n_phi=n_phi))
        except FrequencyUndefinedError as exc:
            dropped.append((r, str(exc)))
    arr = np.array(rows, dtype=float).reshape(-1, 5)
    return FrequencyProfile(a, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], dropped)


def check_frequency_monotone(profile: FrequencyProfile, slack: float = 0.0) -> MonotoneReport:
    N = np.asarray(profile.N)
    r = np.asarray(profile.radii)
    if len(N) < 2:
        raise ValueError("monotonicity needs at least two radii")
    bad = [(float(r[i]), float(r[i + 1]), float(N[i]), float(N[i + 1]))
           for i in range(len(N) - 1) if N[i + 1] < N[i] - slack]
    return MonotoneReport(not bad, bad, slack)


def check_doubling(state: LineFieldState, a, r, R, tol=0.05, *, density=None) -> DoublingReport:
    """Two-sided growth bound

        (r/R)^(2 + 2 N(R)) H(R) <= H(r) <= (r/R)^(2 + 2 N(r)) H(R)

    checked up to the multiplicative tolerance ``1 + tol``.
    """
    if not 0.0 < r < R:
        raise ValueError("need 0 < r < R")
    density = energy_density(state) if density is None else density
    _, _, Hr, Nr = frequency_quantities(state, a, r, density=density)
    _, _, HR, NR = frequency_quantities(state, a, R, density=density)
    lower = (r / R) ** (2.0 + 2.0 * NR) * HR
    upper = (r / R) ** (2.0 + 2.0 * Nr) * HR
    ok = lower <= Hr * (1.0 + tol) and Hr <= upper * (1.0 + tol)
    return DoublingReport(bool(ok), Hr, HR, Nr, NR, lower, upper, tol)


def ball_mean_u2(state: LineFieldState, a, r) -> float:
    """Voxel average of ``|u|^2`` over ``B_r(a)`` with partial weights."""
    wts = _ball_weights(state, a, r) * state.domain.active
    u2 = state.params.k * np.sum(state.values ** 2, axis=-1)
    tot = float(np.sum(wts))
    if tot <= 0.0:
        raise DomainError("empty ball")
    return float(np.sum(wts * u2)) / tot


def blowup_rescale(state: LineFieldState, a, r, n: int = 33) -> LineFieldState:
    """L^2-normalised rescaling ``x -> u(a + r x) / sqrt(mean_{B_r(a)} |u|^2)``
    resampled onto a fresh ``n``-node unit-ball grid."""
    a = np.asarray(a, dtype=float)
    _check_ball(state, a, r)
    mean = ball_mean_u2(state, a, r)
    if mean <= 1e-300:
        raise DegenerateBlowupError(f"no L^2 mass on B_{r}({tuple(a)})")
    unit = ball_domain(n, 1.0)
    values = np.zeros(unit.dims + (3,))
    pts = a + r * unit.coords[unit.active]
    values[unit.active] = sample_line_field(state.domain, state.values, pts,
                                            quotient=state.params.quotient)
    values /= np.sqrt(mean)
    return LineFieldState(unit, values, state.params)


def l2_distance(x: LineFieldState, y: LineFieldState) -> float:
    """Quotient-aware L^2 distance of two fields on the same grid."""
    if x.domain.dims != y.domain.dims:
        raise ValueError("fields live on different grids")
    m = x.domain.active
    d2 = edge_sq_distance(x.values[m], y.values[m], x.params)
    return float(np.sqrt(np.sum(d2) * x.domain.h ** 3))


def homogeneity_defect(state: LineFieldState, a, radii: Sequence[float], n: int = 33) -> float:
    """Largest L^2(B_1) distance between blow-ups at the given radii."""
    ups = [blowup_rescale(state, a, r, n) for r in radii]
    if len(ups) < 2:
        return 0.0
    return max(l2_distance(p, q) for p, q in combinations(ups, 2))


def rotation_drift(x: LineFieldState, y: LineFieldState) -> float:
    """Angle (radians) of the best orthogonal alignment of ``y`` onto ``x``.

    Fits ``R`` minimising ``sum |x_i - R y_i|^2`` over sign-aligned nodal
    pairs (orthogonal Procrustes); measures how much two blow-ups differ by
    a rotation of the target.
    """
    m = x.domain.active
    X = x.values[m]
    Y = y.values[m]
    sgn = np.where(np.sum(X * Y, axis=1) < 0.0, -1.0, 1.0) if x.params.quotient else 1.0
    Y = Y * np.atleast_1d(sgn)[:, None] if x.params.quotient else Y
    U, _, Vt = np.linalg.svd(X.T @ Y)
    R = U @ Vt
    c = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    return float(np.arccos(c))
