"""Cone targets C_k and D_k over S^2 and RP^2.

A point of the cone is stored as a raw vector ``w`` in R^3 with ``s = |w|``
and director ``n = w / |w|``.  The embedded cone point is

    u = (sqrt(k - 1) * s, s * n)  in R^4,

so that ``|u|^2 = k |w|^2``.  In the quotient target D_k the director is only
defined up to sign, which enters through the edge metric alone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class InvalidInputError(ValueError):
    """Raised on non-finite or otherwise malformed field data."""


class TargetMode(str, enum.Enum):
    DK_QUOTIENT = "Dk_quotient"
    CK_NO_QUOTIENT = "Ck_no_quotient"


@dataclass(frozen=True)
class Potential:
    """Bulk potential psi(s) together with its derivative."""

    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ConeParams:
    k: float = 4.0
    target_mode: TargetMode = TargetMode.DK_QUOTIENT
    potential: Optional[Potential] = None

    def __post_init__(self):
        if not np.isfinite(self.k) or self.k <= 1.0:
            raise InvalidInputError(f"cone constant k must satisfy k > 1, got {self.k!r}")
        object.__setattr__(self, "target_mode", TargetMode(self.target_mode))
        if self.potential is not None:
            d0 = float(np.asarray(self.potential.derivative(np.zeros(1)))[0])
            if abs(d0) > 1e-12:
                raise InvalidInputError(f"potential must satisfy psi'(0) = 0, got {d0!r}")

    @property
    def quotient(self) -> bool:
        return self.target_mode is TargetMode.DK_QUOTIENT


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise InvalidInputError("non-finite field value")


def embed(w, params: ConeParams) -> np.ndarray:
    """Map ``w`` (shape ``(..., 3)``) to the embedded cone point in R^4."""
    w = np.asarray(w, dtype=float)
    _check_finite(w)
    s = np.linalg.norm(w, axis=-1, keepdims=True)
    return np.concatenate([np.sqrt(params.k - 1.0) * s, w], axis=-1)


def align_sign(wi, wj) -> np.ndarray:
    """Sign sigma in {+1, -1} minimising |wi - sigma wj|; ties go to +1.

    Works elementwise over leading axes; returns a float array (or scalar).
    """
    wi = np.asarray(wi, dtype=float)
    wj = np.asarray(wj, dtype=float)
    _check_finite(wi, wj)
    dot = np.sum(wi * wj, axis=-1)
    return np.where(dot < 0.0, -1.0, 1.0)


def edge_sq_distance(wi, wj, params: ConeParams) -> np.ndarray:
    """Squared chordal distance between cone points (quotiented in D_k mode).

    ``(k-1)(|wi| - |wj|)^2 + min_sigma |wi - sigma wj|^2``; in C_k mode the
    sign is pinned to +1.
    """
    wi = np.asarray(wi, dtype=float)
    wj = np.asarray(wj, dtype=float)
    _check_finite(wi, wj)
    return _edge_sq(wi, wj, params.k, params.quotient)


def _edge_sq(wi, wj, k, quotient):
    # unchecked kernel shared with the grid energy
    if quotient:
        sigma = np.where(np.sum(wi * wj, axis=-1) < 0.0, -1.0, 1.0)
        diff = wi - sigma[..., None] * wj
    else:
        diff = wi - wj
    ds = np.linalg.norm(wi, axis=-1) - np.linalg.norm(wj, axis=-1)
    return (k - 1.0) * ds * ds + np.sum(diff * diff, axis=-1)
