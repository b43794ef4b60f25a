"""Normal modes of the closed cavity-fiber-cavity system.

Geometry: perfect mirrors at z = +/-Z with Z = L/2 + l, thin-sheet mirrors
at z = +/-L/2.  Mode wavenumbers solve the characteristic condition; modes
are labeled by spatial parity (even: V(z) = V(-z), odd: V(z) = -V(-z)).

Numerical notes
---------------
* Root scanning uses the real half-domain shooting determinant (a Sturm
  function whose sign flips exactly once per eigenvalue).  A scanned
  characteristic *phase* cannot bracket the roots here: with |t|^2 ~ 1e-5
  the phase excursion at each fiber comb point is ~1e-5 of a free spectral
  range wide and invisible to any practical uniform grid.
* At the physical operating point kL is ~1e7 rad, so phases of the form
  k*L mod 2pi are computed from a high-precision reference reduction
  (mpmath) plus a float64 offset.  Mode wavenumbers are stored as a
  float64 value plus a small correction (``k_lo``) so that downstream
  phase evaluations keep ~1e-15 rad accuracy.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.optimize import brentq

from .mirrors import MirrorModel, composite_TR_arrays, mirror_r, mirror_t

TWO_PI = 2.0 * np.pi


class ModeSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Geometry:
    """Closed-system geometry: cavity length l, fiber length L, mirror mu (all meters)."""

    l: float
    L: float
    mu: float

    def __post_init__(self):
        if self.l <= 0 or self.L <= 0:
            raise ValueError("cavity length l and fiber length L must be positive")
        if self.mu < 0:
            raise ValueError("mirror parameter mu must be >= 0")

    @property
    def Z(self) -> float:
        return 0.5 * self.L + self.l

    @property
    def fsr(self) -> float:
        """Per-parity mode spacing pi/Z in wavenumber."""
        return np.pi / self.Z

    @property
    def mirror(self) -> MirrorModel:
        return MirrorModel(mu=self.mu)


@dataclass(frozen=True)
class Mode:
    """One normal mode: wavenumber, parity, norms and cavity content.

    ``k + k_lo`` is the refined wavenumber (k_lo is a sub-ulp correction kept
    for phase-accurate evaluation); ``phase_kL`` is (k*L mod 2pi) computed
    from the high-precision pieces.  Norms follow the 2*sin cavity-amplitude
    normalization: N = 2*N_c + N_f.
    """

    k: float
    k_lo: float
    parity: str
    index_n: int
    n_continuous: float
    N_c: float
    N_f: float
    N: float
    cavity_fraction: float
    phase_kL: float
    residual_rad: float


@dataclass(frozen=True)
class ModeTable:
    """Modes in a window, ascending in k."""

    modes: tuple
    window: tuple
    geometry: Geometry
    missed_root_suspected: bool = False

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, i):
        return self.modes[i]

    @property
    def k(self) -> np.ndarray:
        return np.array([m.k for m in self.modes])

    @property
    def cavity_fraction(self) -> np.ndarray:
        return np.array([m.cavity_fraction for m in self.modes])

    @property
    def parity(self) -> np.ndarray:
        return np.array([m.parity for m in self.modes])

    def of_parity(self, parity: str) -> list:
        return [m for m in self.modes if m.parity == parity]


def reduce_mod_2pi(x: float, scale: float) -> float:
    """(x * scale) mod 2pi, exact for the given float64 pair, in [0, 2pi)."""
    with mpmath.workdps(45):
        return float(mpmath.fmod(mpmath.mpf(x) * mpmath.mpf(scale), 2 * mpmath.pi))


def _phase_mod(ref_phase: float, dk: np.ndarray, scale: float) -> np.ndarray:
    """(ref_phase + dk*scale) mod 2pi without large-argument loss."""
    return np.mod(ref_phase + dk * scale, TWO_PI)


# ---------------------------------------------------------------------------
# Characteristic phase (mode condition as a phase defect)
# ---------------------------------------------------------------------------

def _branch_sign(parity: str) -> float:
    # Spatially even modes solve the lower-sign branch of the two-mirror
    # condition, odd modes the upper one (pinned by the mu=0 box limit).
    if parity == "even":
        return -1.0
    if parity == "odd":
        return 1.0
    raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")


def characteristic_phase(geometry: Geometry, parity: str, k, k_ref: float | None = None):
    """Phase defect of the mode condition, unwrapped along the input array.

    Zeros (mod 2pi) are the mode wavenumbers of the given spatial parity.
    With the composite section coefficients referenced to its end planes the
    condition reads exp(-2ikl) = +/-T - R, so the returned quantity is the
    unwrapped phase of exp(-2ikl)/(+/-T - R); it differs from the phase
    written with end-mirror-referenced quantities only by the referencing
    factor exp(ikL) common to T and R.

    Raises ModeSolverError if |+/-T - R| deviates from 1 by more than 1e-6.
    """
    s = _branch_sign(parity)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if np.any(k <= 0):
        raise ValueError("wavenumber k must be positive")
    if k_ref is None:
        k_ref = float(k[len(k) // 2])
    ref_L = reduce_mod_2pi(k_ref, geometry.L)
    dk = k - k_ref
    expikL = np.exp(1j * _phase_mod(ref_L, dk, geometry.L))
    T, R = composite_TR_arrays(geometry.mu, k, expikL)
    comb = s * T - R
    mod = np.abs(comb)
    if np.any(np.abs(mod - 1.0) > 1e-6):
        raise ModeSolverError(
            "|+/-T - R| deviates from 1 by more than 1e-6; mirror model is not lossless"
        )
    w = np.exp(-2j * k * geometry.l) / comb
    ph = np.unwrap(np.angle(w))
    return ph if ph.size > 1 else float(ph[0])


def characteristic_residual(geometry: Geometry, parity: str, k_hi: float, k_lo: float = 0.0) -> float:
    """Wrapped phase defect in (-pi, pi] at a single refined wavenumber."""
    s = _branch_sign(parity)
    ref_L = reduce_mod_2pi(k_hi, geometry.L)
    phase_kL = (ref_L + k_lo * geometry.L) % TWO_PI
    k = k_hi + k_lo
    expikL = np.exp(1j * phase_kL)
    T, R = composite_TR_arrays(geometry.mu, np.array([k]), np.array([expikL]))
    w = np.exp(-2j * k * geometry.l) / (s * T[0] - R[0])
    return float(np.angle(w))


# ---------------------------------------------------------------------------
# Sturm shooting determinant (root bracketing function)
# ---------------------------------------------------------------------------

def _sturm(geometry: Geometry, parity: str, k_ref: float, ref_half_L: float, dk):
    """Half-domain shooting defect; sign flips exactly at eigenvalues.

    Left cavity field sin(k(z+Z)); the sheet maps V -> V + mu*V' with V'
    continuous; propagate the half fiber; even modes require V'(0) = 0,
    odd modes V(0) = 0.
    """
    dk = np.asarray(dk, dtype=float)
    k = k_ref + dk
    kl = k * geometry.l
    V = np.sin(kl)
    Vp = k * np.cos(kl)
    V = V + geometry.mu * Vp
    ang = _phase_mod(ref_half_L, dk, 0.5 * geometry.L)
    c = np.cos(ang)
    s = np.sin(ang)
    if parity == "even":
        return -V * k * s + Vp * c
    return V * c + Vp * s / k


def cavity_line_wavenumbers(geometry: Geometry, k_min: float, k_max: float) -> np.ndarray:
    """Cavity quasi-resonances in [k_min, k_max].

    For the r = 1 - t sheet the cavity condition is k*l = (n + 1/2)*pi +
    1/(mu*k) (Neumann-like mirror phase); one fixed-point pass on the small
    shift is ample since the hybridized modes are relocated by argmax of
    cavity content anyway.
    """
    if geometry.mu == 0.0:
        return np.array([])
    n_lo = int(np.floor(k_min * geometry.l / np.pi - 0.5)) - 1
    n_hi = int(np.ceil(k_max * geometry.l / np.pi - 0.5)) + 1
    ns = np.arange(n_lo, n_hi + 1)
    k0 = (ns + 0.5) * np.pi / geometry.l
    k0 = k0[k0 > 0]
    k = ((k0 * geometry.l) + 1.0 / (geometry.mu * k0)) / geometry.l
    return k[(k >= k_min) & (k <= k_max)]


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def _norm_factors_from_phase(geometry: Geometry, k: float, parity: str, phase_kL: float):
    """Closed-form (N_c, N_f) given kL mod 2pi; 2*sin cavity normalization."""
    l, L, mu = geometry.l, geometry.L, geometry.mu
    N_c = 2.0 * l - np.sin(2.0 * k * l) / k
    t = 2.0 / (2.0 - 1j * mu * k)
    r = 1.0 - t
    p = 1.0 if parity == "even" else -1.0
    eikL = np.exp(1j * phase_kL)
    N_f = 2.0 * (L + p * np.sin(phase_kL) / k) * abs(t) ** 2 / abs(1.0 - p * r * eikL) ** 2
    return float(N_c), float(N_f)


def norm_factors(geometry: Geometry, k: float, parity: str):
    """Closed-form cavity and fiber norm contributions (N_c, N_f) at k.

    Valid on-shell; off-shell values are still returned (useful for Airy
    envelope diagnostics) but flagged with a warning.  For full-scale kL,
    use the values stored on a found Mode, which carry the high-precision
    phase reduction.
    """
    _branch_sign(parity)
    phase_kL = reduce_mod_2pi(k, geometry.L)
    res = abs(characteristic_residual(geometry, parity, k))
    if res > 1e-6:
        warnings.warn(
            f"norm_factors: k={k!r} is non-modal (characteristic residual {res:.2e} rad)",
            stacklevel=2,
        )
    return _norm_factors_from_phase(geometry, k, parity, phase_kL)


# ---------------------------------------------------------------------------
# Mode function
# ---------------------------------------------------------------------------

def _fiber_amplitudes(geometry: Geometry, k: float):
    """Rightward/leftward fiber amplitudes continuing 2*sin(k(z+Z)) through
    the left sheet, referenced at z = -L/2."""
    t = complex(mirror_t(geometry.mirror, k))
    r = complex(mirror_r(geometry.mirror, k))
    kl = k * geometry.l
    a_L = -1j * np.exp(1j * kl)
    b_L = +1j * np.exp(-1j * kl)
    b_f = (b_L - r * a_L) / t
    a_f = ((t - r) * a_L + r * b_L) / t   # t^2 - r^2 = t - r for r = 1 - t
    return a_f, b_f


def mode_function(geometry: Geometry, mode: Mode, z):
    """Normalized mode amplitude V(z) on [-Z, Z].

    Cavity regions carry the closed forms (2/sqrt(N)) sin(k(z+Z)) on the
    left and parity * (2/sqrt(N)) sin(k(Z-z)) on the right; the fiber value
    is the transfer continuation through the left sheet.  Phases are
    accumulated in extended precision (kz is ~1e7 rad at the physical scale).
    """
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    Z = geometry.Z
    if np.any(z < -Z - 1e-12) or np.any(z > Z + 1e-12):
        raise ValueError("z outside the closed system [-Z, Z]")
    k_hi, k_lo = mode.k, mode.k_lo
    k = k_hi + k_lo
    amp = 2.0 / np.sqrt(mode.N)
    p = 1.0 if mode.parity == "even" else -1.0
    out = np.empty_like(z)

    zl = np.longdouble(z)
    left = z <= -0.5 * geometry.L
    right = z >= 0.5 * geometry.L
    fib = ~(left | right)

    ang_l = np.longdouble(k_hi) * (zl[left] + np.longdouble(Z)) + np.longdouble(k_lo) * (zl[left] + Z)
    out[left] = amp * np.sin(np.mod(ang_l, np.longdouble(TWO_PI))).astype(float)

    ang_r = np.longdouble(k_hi) * (np.longdouble(Z) - zl[right]) + np.longdouble(k_lo) * (Z - zl[right])
    out[right] = p * amp * np.sin(np.mod(ang_r, np.longdouble(TWO_PI))).astype(float)

    if np.any(fib):
        a_f, b_f = _fiber_amplitudes(geometry, k)
        x = zl[fib] + np.longdouble(0.5 * geometry.L)
        ang = np.mod(np.longdouble(k_hi) * x + np.longdouble(k_lo) * x, np.longdouble(TWO_PI)).astype(float)
        val = a_f * np.exp(1j * ang) + b_f * np.exp(-1j * ang)
        out[fib] = (amp / 2.0) * val.real

    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Root search
# ---------------------------------------------------------------------------

def _scan_grid(geometry: Geometry, k_min: float, k_max: float, per_fsr: int, refine: int) -> np.ndarray:
    """Scan offsets (relative to window center) with refinement near cavity lines."""
    k_ref = 0.5 * (k_min + k_max)
    fsr = geometry.fsr
    n_base = max(int(np.ceil((k_max - k_min) / fsr * per_fsr)), 8) + 1
    grid = [np.linspace(k_min - k_ref, k_max - k_ref, n_base)]
    for kc in cavity_line_wavenumbers(geometry, k_min - 3 * fsr, k_max + 3 * fsr):
        lo = max(kc - 3 * fsr, k_min) - k_ref
        hi = min(kc + 3 * fsr, k_max) - k_ref
        if hi > lo:
            grid.append(np.linspace(lo, hi, int(6 * per_fsr * refine) + 1))
    dk = np.unique(np.concatenate(grid))
    return k_ref, dk


def _refine_root(geometry: Geometry, parity: str, k_ref: float, ref_half_L: float,
                 a: float, b: float) -> tuple:
    """Two-stage refinement: brentq in the scan frame, then bisection about a
    recentered reference so the stored (k, k_lo) pair carries sub-ulp accuracy."""
    f = lambda dk: float(_sturm(geometry, parity, k_ref, ref_half_L, np.array([dk]))[0])
    dk1 = brentq(f, a, b, xtol=1e-15 * k_ref, rtol=8.9e-16)
    k_hi = k_ref + dk1          # rounded; stage 2 measures the remainder
    ref2 = reduce_mod_2pi(k_hi, 0.5 * geometry.L)
    g = lambda d: float(_sturm(geometry, parity, k_hi, ref2, np.array([d]))[0])
    half = max(4e-15 * k_ref, abs(dk1) * 4e-15)
    lo, hi = -half, half
    glo, ghi = g(lo), g(hi)
    tries = 0
    while glo * ghi > 0 and tries < 40:
        half *= 4.0
        lo, hi = -half, half
        glo, ghi = g(lo), g(hi)
        tries += 1
    if glo * ghi > 0:
        return k_hi, 0.0
    for _ in range(110):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if glo * gm <= 0:
            hi, ghi = mid, gm
        else:
            lo, glo = mid, gm
        if hi - lo < 1e-30 + 1e-18 * abs(mid):
            break
    return k_hi, 0.5 * (lo + hi)


def find_modes(geometry: Geometry, window: tuple, parity: str = "both",
               scan_per_fsr: int = 8, refine_factor: int = 32,
               index_reference: int | None = None) -> ModeTable:
    """All modes with k in ``window`` = (k_min, k_max).

    Scans the Sturm shooting defect on a grid of ``scan_per_fsr`` points per
    free spectral range (locally ``refine_factor`` denser around cavity
    quasi-resonances, where the hybridized roots shift by O(1) spacings),
    bisects every sign change, and assembles norms and cavity content from
    the closed forms with phase-exact reductions.

    ``index_reference`` fixes the integer offset of the reported mode index
    n = k*L/pi - index_reference; by default the comb integer nearest the
    window center is used.
    """
    k_min, k_max = float(window[0]), float(window[1])
    if not (0 < k_min < k_max):
        raise ValueError("window must satisfy 0 < k_min < k_max")
    if (k_max - k_min) < geometry.fsr:
        raise ModeSolverError(
            f"window too small: width {k_max - k_min:.3e} < one free spectral range {geometry.fsr:.3e}"
        )
    parities = ["even", "odd"] if parity == "both" else [parity]
    _ = [_branch_sign(p) for p in parities]

    k_ref, dks = _scan_grid(geometry, k_min, k_max, scan_per_fsr, refine_factor)
    ref_half_L = reduce_mod_2pi(k_ref, 0.5 * geometry.L)
    if index_reference is None:
        index_reference = int(round(k_ref * geometry.L / np.pi))

    modes = []
    for par in parities:
        F = _sturm(geometry, par, k_ref, ref_half_L, dks)
        flips = np.nonzero(np.sign(F[:-1]) * np.sign(F[1:]) < 0)[0]
        for i in flips:
            k_hi, k_lo = _refine_root(geometry, par, k_ref, ref_half_L, dks[i], dks[i + 1])
            k = k_hi + k_lo
            phase_kL = (reduce_mod_2pi(k_hi, geometry.L) + k_lo * geometry.L) % TWO_PI
            N_c, N_f = _norm_factors_from_phase(geometry, k, par, phase_kL)
            N = 2.0 * N_c + N_f
            res = characteristic_residual(geometry, par, k_hi, k_lo)
            n_cont = (k_hi * geometry.L / np.pi - index_reference) + k_lo * geometry.L / np.pi
            modes.append(Mode(
                k=k, k_lo=(k_hi - k) + k_lo, parity=par, index_n=int(round(n_cont)),
                n_continuous=n_cont, N_c=N_c, N_f=N_f, N=N,
                cavity_fraction=2.0 * N_c / N, phase_kL=phase_kL,
                residual_rad=abs(res),
            ))

    modes.sort(key=lambda m: m.k)
    # duplicate guard: distinct roots are separated by >> the combined spacing tolerance
    min_sep = 1e-3 * np.pi / (geometry.L + 2 * geometry.l)
    deduped = []
    for m in modes:
        if deduped and abs(m.k - deduped[-1].k) < min_sep:
            continue
        deduped.append(m)
    modes = deduped

    suspected = _missed_root_check(geometry, modes, parities)
    return ModeTable(modes=tuple(modes), window=(k_min, k_max), geometry=geometry,
                     missed_root_suspected=suspected)


def _missed_root_check(geometry: Geometry, modes: list, parities: list) -> bool:
    """Spacing heuristic: an anomalously wide same-parity gap (>1.5x both its
    neighbor and the median) away from any cavity-content resonance suggests
    a missed root.  Narrow gaps are physical (hybridization clustering)."""
    suspected = False
    for par in parities:
        sub = [m for m in modes if m.parity == par]
        ks = np.array([m.k for m in sub])
        fr = np.array([m.cavity_fraction for m in sub])
        if len(ks) < 4:
            continue
        gaps = np.diff(ks)
        med = np.median(gaps)
        f_med = np.median(fr)
        for j in range(1, len(gaps)):
            if gaps[j] > 1.5 * gaps[j - 1] and gaps[j] > 1.6 * med:
                near_res = fr[max(0, j - 1): j + 3].max() > 10 * max(f_med, 1e-12)
                if not near_res:
                    warnings.warn(
                        f"possible missed root near k={ks[j]:.6e} "
                        f"(spacing jump x{gaps[j] / gaps[j - 1]:.2f} without a cavity resonance)",
                        stacklevel=3,
                    )
                    suspected = True
    return suspected
