"""Atom-field couplings, effective two-photon rates, and the pulse schedule.

Couplings are calibrated so a mode fully localized in a single cavity
(N = 2l) couples to an atom at an antinode at exactly g_max: the raw
dipole/beam-area prefactor is replaced by C = g_max * sqrt(2l).

Sign structure: atom A couples with +sin(k s); atom B picks up the parity
of the right-cavity mode form, +sin(k s) for even modes and -sin(k s) for
odd ones.  For mirror-symmetric atom positions this makes g_A*g_B positive
on even modes and negative on odd modes, which is what prevents a single
perfect dark state in the multimode system.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.constants import c as C_LIGHT

from .modes import Geometry, Mode, ModeTable
from .mirrors import MirrorModel, mirror_t


@dataclass(frozen=True)
class AtomParams:
    """One atom: distance s from its cavity's perfect end mirror, peak
    coupling calibration g_max, and laser detuning Delta (rad/s)."""

    s: float
    g_max: float
    Delta: float
    side: str

    def __post_init__(self):
        if self.side not in ("A", "B"):
            raise ValueError(f"side must be 'A' or 'B', got {self.side!r}")
        if self.s <= 0:
            raise ValueError("atom position s must be positive")
        if self.Delta == 0:
            raise ValueError("laser detuning Delta must be nonzero")
        if abs(self.Delta) < 4 * self.g_max:
            warnings.warn(
                "Delta < 4*g_max: outside the adiabatic-elimination regime",
                stacklevel=2,
            )


@dataclass(frozen=True)
class PulseSchedule:
    """Gaussian pulse pair Omega(t) = Omega0 * exp(-(t - t_peak)^2 / T^2).

    The receiving atom's pulse (B) leads: t_peak_A = t_peak_B + tau -
    travel_time, with tau > travel_time in every regime treated here, so B
    turns on first (the adiabatic-passage ordering; the transfer fails as a
    dark-state process with the opposite order).
    """

    Omega0_A: float
    Omega0_B: float
    T: float
    tau: float
    t_peak_B: float = 0.0
    travel_time: float = 0.0
    phase_compensation: bool = True

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("pulse width T must be positive")

    @property
    def t_peak_A(self) -> float:
        return self.t_peak_B + self.tau - self.travel_time

    def with_amplitudes(self, Omega0_A: float, Omega0_B: float | None = None) -> "PulseSchedule":
        if Omega0_B is None:
            Omega0_B = Omega0_A
        return replace(self, Omega0_A=Omega0_A, Omega0_B=Omega0_B)


@dataclass(frozen=True)
class SystemParams:
    """Full physical scenario; geometric and atomic parameters in SI."""

    lam: float
    geometry: Geometry
    gamma_c: float
    gamma_f: float
    atom_A: AtomParams
    atom_B: AtomParams
    pulses: PulseSchedule
    laser_detuning_offset: float = 0.0
    mode_window: float = 0.0   # rad/s half-width; 0 means "use default"

    @property
    def k0(self) -> float:
        return 2 * np.pi / self.lam

    @property
    def t_squared(self) -> float:
        """Mirror |t|^2 at the carrier wavenumber k0."""
        return float(abs(mirror_t(MirrorModel(self.geometry.mu), self.k0)) ** 2)

    @property
    def kappa_c(self) -> float:
        """Cavity-to-fiber leakage rate c|t(k0)|^2 / (2l); derived, not stored."""
        return C_LIGHT * self.t_squared / (2 * self.geometry.l)

    @property
    def L_eff(self) -> float:
        """Separation l/|t(k0)|^2 beyond which many fiber modes couple."""
        return self.geometry.l / self.t_squared

    def validate(self) -> None:
        l = self.geometry.l
        for atom in (self.atom_A, self.atom_B):
            if not (0 < atom.s < l):
                raise ValueError(f"atom {atom.side}: s={atom.s} not inside cavity (0, {l})")


def coupling_g(mode: Mode, atom: AtomParams, geometry: Geometry) -> float:
    """Atom-mode coupling g = g_max * sqrt(2l/N) * sigma * sin(k s)."""
    sigma = 1.0
    if atom.side == "B" and mode.parity == "odd":
        sigma = -1.0
    return atom.g_max * np.sqrt(2.0 * geometry.l / mode.N) * sigma * np.sin(mode.k * atom.s)


def coupling_vector(table: ModeTable, atom: AtomParams) -> np.ndarray:
    return np.array([coupling_g(m, atom, table.geometry) for m in table])


def effective_G(mode: Mode, atom: AtomParams, Omega: float, geometry: Geometry) -> float:
    """Two-photon coupling G = g * Omega / (2 Delta) through one mode."""
    if atom.Delta == 0:
        raise ValueError("Delta must be nonzero")
    return coupling_g(mode, atom, geometry) * Omega / (2 * atom.Delta)


def effective_G_value(g: float, Omega: float, Delta: float) -> float:
    if Delta == 0:
        raise ValueError("Delta must be nonzero")
    return g * Omega / (2 * Delta)


def stark_shift(Omega: float, Delta: float) -> float:
    """AC-Stark shift Omega^2 / (4 Delta) of the driven ground state."""
    if Delta == 0:
        raise ValueError("Delta must be nonzero")
    return Omega ** 2 / (4 * Delta)


def pulse_value(schedule: PulseSchedule, side: str, t) -> float:
    """Rabi frequency of the given side's pulse at time t."""
    if side == "A":
        peak, amp = schedule.t_peak_A, schedule.Omega0_A
    elif side == "B":
        peak, amp = schedule.t_peak_B, schedule.Omega0_B
    else:
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")
    t = np.asarray(t, dtype=float)
    out = amp * np.exp(-((t - peak) / schedule.T) ** 2)
    return float(out) if out.ndim == 0 else out


def mode_detuning(mode: Mode, omega_L: float) -> float:
    """Laser detuning from the mode, delta = omega_L - c*k."""
    return omega_L - C_LIGHT * (mode.k + mode.k_lo)


def antinode_position(k: float, l: float) -> float:
    """Atom position at the mode antinode nearest the cavity center,
    k*s = pi/2 mod pi."""
    m = round(k * (0.5 * l) / np.pi - 0.5)
    m = max(m, 0)
    s = (m + 0.5) * np.pi / k
    if not (0 < s < l):
        s = 0.5 * np.pi / k
    return s
