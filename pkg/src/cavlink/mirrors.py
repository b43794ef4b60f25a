"""Thin-sheet mirror scattering and the composite two-mirror fiber section.

The partially transparent mirrors bounding the fiber are modeled as
infinitesimally thin sheets with transmission t(k) = 2/(2 - i*mu*k) and
reflection r(k) = 1 - t(k).  Scattering is lossless and symmetric:
|t|^2 + |r|^2 = 1 and Re(r conj(t)) = 0 for every real k.

The two-sheet section (sheets at -L/2 and +L/2) is composed by 2x2
transfer matrices.  Amplitudes are referenced to the input plane z = -L/2
for R and to the output plane z = +L/2 for T, so an empty section (mu = 0)
has T = exp(ikL), R = 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MirrorModel:
    """Thin-sheet mirror with dielectric parameter mu (meters)."""

    mu: float

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError(f"mirror parameter mu must be >= 0, got {self.mu}")


@dataclass(frozen=True)
class CompositeScattering:
    """Transmission/reflection of the two-mirror fiber section at one k."""

    T: complex
    R: complex
    k: float
    L: float


def _check_k(k) -> None:
    if np.any(np.asarray(k) <= 0):
        raise ValueError("wavenumber k must be positive")


def mirror_t(model: MirrorModel, k):
    """Amplitude transmission t(k) = 2/(2 - i*mu*k) of a single sheet."""
    _check_k(k)
    return 2.0 / (2.0 - 1j * model.mu * np.asarray(k, dtype=float))


def mirror_r(model: MirrorModel, k):
    """Amplitude reflection r(k) = 1 - t(k); satisfies |t|^2 + |r|^2 = 1."""
    return 1.0 - mirror_t(model, k)


def sheet_transfer_matrix(model: MirrorModel, k):
    """2x2 transfer matrix of one sheet, mapping (a, b) left to right.

    Rightward/leftward amplitudes are referenced at the sheet plane.  The
    matrix is unimodular; built from the symmetric unitary S-matrix
    [[r, t], [t, r]].
    """
    t = mirror_t(model, k)
    r = mirror_r(model, k)
    return np.array([[(t * t - r * r) / t, r / t], [-r / t, 1.0 / t]])


def propagation_matrix(k, d):
    """Free-space transfer matrix over distance d (re-references by d)."""
    return np.array([[np.exp(1j * k * d), 0.0], [0.0, np.exp(-1j * k * d)]])


def composite_TR(model: MirrorModel, k: float, L: float) -> CompositeScattering:
    """Composite T, R of two identical sheets at -L/2 and +L/2.

    Computed as the transfer-matrix product sheet * propagation(L) * sheet.
    For any real k the result satisfies |T|^2 + |R|^2 = 1 and |T - R| =
    |-T - R| = 1 (the combinations entering the closed-system mode
    condition are pure phases).
    """
    _check_k(k)
    if L <= 0:
        raise ValueError(f"section length L must be positive, got {L}")
    M = sheet_transfer_matrix(model, k) @ propagation_matrix(k, L) @ sheet_transfer_matrix(model, k)
    T = 1.0 / M[1, 1]          # det M = 1
    R = -M[1, 0] / M[1, 1]
    return CompositeScattering(T=complex(T), R=complex(R), k=float(k), L=float(L))


def composite_TR_arrays(mu: float, k, expikL):
    """Vectorized closed-form composite T, R for mode scanning.

    ``expikL`` is exp(ikL) supplied by the caller (computed in reduced-phase
    arithmetic when kL is large).  Same referencing as :func:`composite_TR`.
    """
    k = np.asarray(k, dtype=float)
    t = 2.0 / (2.0 - 1j * mu * k)
    r = 1.0 - t
    e2 = expikL * expikL
    den = 1.0 - r * r * e2
    T = t * t * expikL / den
    R = r * (1.0 + (t * t - r * r) * e2) / den
    return T, R
