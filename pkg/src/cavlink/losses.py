"""Per-mode decay rates and cross-mode loss couplings.

Each mode decays at the weighted average of the cavity and fiber loss
rates, gamma_i = f_i*gamma_c + (1 - f_i)*gamma_f with f_i the cavity
fraction 2*N_c/N.  Absorption also cross-couples same-parity modes:
C_ii' = i*(gamma_f - gamma_c)*sqrt(f_i f_i') for i != i', zero across
parities.  Energy shifts and Re C are dropped (sign-averaged absorber
detunings).

The damping generator assembled from (gamma, C) is, per parity block,
gamma_c * w w^T + gamma_f * (1 - w w^T) with w_i = sqrt(f_i) -- positive
semidefinite, so the total norm is non-increasing under either value of
the amplitude/population rate convention as long as gamma and C are
scaled together (see dynamics).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modes import ModeTable


@dataclass(frozen=True)
class LossParams:
    """Cavity photon loss rate and fiber absorption rate (1/s)."""

    gamma_c: float
    gamma_f: float

    def __post_init__(self):
        if self.gamma_c < 0 or self.gamma_f < 0:
            raise ValueError("loss rates must be nonnegative")


@dataclass(frozen=True)
class LossMatrix:
    """Per-mode decay vector and cross-coupling data.

    ``w_even``/``w_odd`` hold sqrt(cavity fraction) masked by parity, so the
    dense C never needs materializing in the dynamics:
    C_ij = i*(gamma_f - gamma_c) * (w_even_i w_even_j + w_odd_i w_odd_j),
    i != j.
    """

    gamma: np.ndarray
    w_even: np.ndarray
    w_odd: np.ndarray
    gamma_c: float
    gamma_f: float

    @property
    def n_modes(self) -> int:
        return len(self.gamma)

    def C_dense(self) -> np.ndarray:
        """Dense cross-coupling matrix (diagonal zero), for tests/inspection."""
        s = 1j * (self.gamma_f - self.gamma_c)
        C = s * (np.outer(self.w_even, self.w_even) + np.outer(self.w_odd, self.w_odd))
        np.fill_diagonal(C, 0.0)
        return C


def build_loss(modes: ModeTable, params: LossParams) -> LossMatrix:
    """Loss model for every mode in the table."""
    f = modes.cavity_fraction
    # written so gamma_c == gamma_f gives gamma_i == gamma exactly
    gamma = params.gamma_f + f * (params.gamma_c - params.gamma_f)
    even = modes.parity == "even"
    w = np.sqrt(f)
    return LossMatrix(
        gamma=gamma,
        w_even=np.where(even, w, 0.0),
        w_odd=np.where(~even, w, 0.0),
        gamma_c=params.gamma_c,
        gamma_f=params.gamma_f,
    )
