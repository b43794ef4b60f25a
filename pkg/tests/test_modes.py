"""Mode solver: spectra, norms, mode functions, orthogonality."""
import numpy as np
import pytest

from cavlink.modes import (
    Geometry,
    ModeSolverError,
    characteristic_phase,
    characteristic_residual,
    cavity_line_wavenumbers,
    find_modes,
    mode_function,
    norm_factors,
)

# Moderate geometry: phases tractable, all closed forms exercised.
GEO = Geometry(l=2.0, L=30.0, mu=0.8)

# Full physical-scale geometry: l = 1e-5 m, L/l = 1e5 (symmetric), mu*k0 = 500.
LAM = 852e-9
K0 = 2 * np.pi / LAM
FULL_GEO = Geometry(l=1e-5, L=1.0, mu=500.0 / K0)


def gauss_quad(f, a, b, n_seg, order=8):
    """Composite Gauss-Legendre quadrature, vectorized over segments."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n_seg + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    pts = (mid[:, None] + half * x[None, :]).ravel()
    vals = f(pts).reshape(n_seg, order)
    return float(np.sum(vals @ w) * half)


def quad_norms(geo, mode):
    """Quadrature oracle for the region norms of |2 sin|-normalized fields."""
    Z = geo.Z
    raw = lambda z: mode_function(geo, mode, z) * np.sqrt(mode.N)
    lam_seg = max(int(mode.k * (Z - geo.L / 2) / 2), 8)
    Nc = gauss_quad(lambda z: raw(z) ** 2, -Z + 1e-15, -geo.L / 2 - 1e-15, lam_seg)
    nf_seg = max(int(mode.k * geo.L / 2), 16)
    Nf = gauss_quad(lambda z: raw(z) ** 2, -geo.L / 2 + 1e-15, geo.L / 2 - 1e-15, nf_seg)
    return Nc, Nf


class TestCharacteristicPhase:
    def test_mu_zero_box_spectrum(self):
        # mu = 0: zeros at k = n*pi/(2Z), the closed box of length 2Z
        geo = Geometry(l=1.3, L=11.0, mu=0.0)
        table = find_modes(geo, (2.0, 2.0 + 8 * geo.fsr), parity="both")
        Z = geo.Z
        ns = np.array([round(m.k * 2 * Z / np.pi) for m in table])
        k_exact = ns * np.pi / (2 * Z)
        assert np.max(np.abs(table.k - k_exact) / k_exact) < 1e-12
        # box modes alternate parity with n: odd n -> cos-like (even parity)
        for m, n in zip(table, ns):
            assert m.parity == ("even" if n % 2 == 1 else "odd")

    def test_decoupled_limit_fiber_and_cavity_lines(self):
        # t -> 0 (huge mu*k): spectrum approaches fiber comb + cavity lines
        geo = Geometry(l=2.0, L=30.0, mu=3e9)
        lo, hi = 3.0, 3.0 + 10 * geo.fsr
        table = find_modes(geo, (lo, hi), parity="even")
        # candidate decoupled wavenumbers: fiber Neumann comb k = m*pi/L and
        # cavity lines k = (n+1/2)*pi/l (r -> +1 mirror phase)
        mf = np.arange(int(lo * geo.L / np.pi) - 1, int(hi * geo.L / np.pi) + 2) * np.pi / geo.L
        nc = (np.arange(int(lo * geo.l / np.pi) - 1, int(hi * geo.l / np.pi) + 2) + 0.5) * np.pi / geo.l
        cand = np.concatenate([mf, nc])
        for m in table:
            rel = np.min(np.abs(cand - m.k)) / m.k
            assert rel < 1e-9

    def test_phase_zeros_at_roots(self):
        table = find_modes(GEO, (3.0, 3.0 + 6 * GEO.fsr), parity="both")
        for m in table:
            assert abs(characteristic_residual(GEO, m.parity, m.k, m.k_lo)) < 1e-9

    def test_consecutive_solutions_spacing(self):
        # full-scale geometry: consecutive same-parity roots spaced ~pi/Z
        table = find_modes(FULL_GEO, (K0 - 10 * FULL_GEO.fsr, K0 + 10 * FULL_GEO.fsr),
                           parity="even")
        gaps = np.diff(table.k)
        assert np.all(np.abs(gaps - FULL_GEO.fsr) < 0.6 * FULL_GEO.fsr)

    def test_lossless_model_guard(self):
        ph = characteristic_phase(GEO, "even", np.linspace(3.0, 3.2, 50))
        assert np.all(np.isfinite(ph))
        with pytest.raises(ValueError):
            characteristic_phase(GEO, "sideways", 3.0)


class TestFindModes:
    def test_window_too_small(self):
        with pytest.raises(ModeSolverError):
            find_modes(GEO, (3.0, 3.0 + 0.5 * GEO.fsr))

    def test_root_count_completeness_random_geometries(self):
        # count in a window of width W*pi/Z equals 2W +/- 2 (even plus odd)
        rng = np.random.default_rng(3)
        for _ in range(10):
            geo = Geometry(l=rng.uniform(0.5, 3.0), L=rng.uniform(8.0, 60.0),
                           mu=rng.uniform(0.05, 4.0))
            W = rng.integers(4, 9)
            k0 = rng.uniform(2.0, 6.0)
            table = find_modes(geo, (k0, k0 + W * geo.fsr), parity="both")
            assert abs(len(table) - 2 * W) <= 2

    def test_strictly_increasing_no_duplicates(self):
        table = find_modes(GEO, (3.0, 3.0 + 8 * GEO.fsr), parity="both")
        gaps = np.diff(table.k)
        assert np.all(gaps > 1e-3 * np.pi / (GEO.L + 2 * GEO.l))

    def test_full_scale_resonance_peak(self):
        # single resonance peak in cavity content; even/odd branches nearly
        # coincident for the symmetric geometry L/l = 1e5
        kc = cavity_line_wavenumbers(FULL_GEO, K0 - np.pi / FULL_GEO.l, K0 + np.pi / FULL_GEO.l)
        kc = kc[np.argmin(np.abs(kc - K0))]
        table = find_modes(FULL_GEO, (kc - 12 * FULL_GEO.fsr, kc + 12 * FULL_GEO.fsr))
        for par in ("even", "odd"):
            sub = table.of_parity(par)
            fr = np.array([m.cavity_fraction for m in sub])
            assert fr.max() > 0.4
            # single peak: fractions fall off monotonically within a couple modes
            i = int(np.argmax(fr))
            assert fr[i] > 5 * np.partition(fr, -3)[-3] or fr.max() > 0.6
        ke = max(table.of_parity("even"), key=lambda m: m.cavity_fraction).k
        ko = max(table.of_parity("odd"), key=lambda m: m.cavity_fraction).k
        comb = np.pi / (FULL_GEO.L + 2 * FULL_GEO.l)
        assert abs(ke - ko) < 1.0 * comb

    def test_parity_split_alignment_control(self):
        # Fine-tuning L/l moves the cavity line onto / between comb points.
        # Aligned: the favored parity peaks singly at the line while the
        # other parity's weight splits into a displaced doublet.  Midway:
        # even and odd branches are nearly coincident (the two display panels).
        l, mu = 1e-5, 500.0 / K0
        n_half = round(K0 * l / np.pi - 0.5)
        kline = ((n_half + 0.5) * np.pi + 1.0 / (mu * K0)) / l

        def peak_asymmetry(L):
            geo = Geometry(l=l, L=L, mu=mu)
            kc = cavity_line_wavenumbers(geo, kline - 3 * geo.fsr, kline + 3 * geo.fsr)
            kc = kc[np.argmin(np.abs(kc - kline))]
            t = find_modes(geo, (kc - 8 * geo.fsr, kc + 8 * geo.fsr))
            fe = max(m.cavity_fraction for m in t.of_parity("even"))
            fo = max(m.cavity_fraction for m in t.of_parity("odd"))
            return abs(fe - fo)

        L0 = 1e5 * l
        frac = (kline * L0 / np.pi) % 1.0
        L_aligned = L0 - frac * np.pi / kline
        L_midway = L_aligned - 0.5 * np.pi / kline
        assert peak_asymmetry(L_aligned) > 0.2
        assert peak_asymmetry(L_midway) < 0.1


class TestNorms:
    def test_nc_at_cavity_antiresonance(self):
        # k*l = n*pi exactly -> N_c = 2l
        geo = GEO
        k = 5 * np.pi / geo.l
        with pytest.warns(UserWarning):
            Nc, _ = norm_factors(geo, k, "even")
        assert Nc == pytest.approx(2 * geo.l, rel=1e-12)

    def test_closed_form_vs_quadrature_all_modes(self):
        table = find_modes(GEO, (3.0, 3.0 + 6 * GEO.fsr), parity="both")
        for m in table:
            Nc_q, Nf_q = quad_norms(GEO, m)
            assert abs(Nc_q - m.N_c) / m.N_c < 1e-8
            assert abs(Nf_q - m.N_f) / m.N_f < 1e-8

    def test_closed_form_vs_quadrature_full_scale(self):
        kc = cavity_line_wavenumbers(FULL_GEO, K0 - np.pi / FULL_GEO.l, K0 + np.pi / FULL_GEO.l)
        kc = kc[np.argmin(np.abs(kc - K0))]
        table = find_modes(FULL_GEO, (kc - 2.2 * FULL_GEO.fsr, kc + 2.2 * FULL_GEO.fsr))
        assert len(table) >= 4
        for m in list(table)[:4]:
            Nc_q, Nf_q = quad_norms(FULL_GEO, m)
            assert abs(Nc_q - m.N_c) / m.N_c < 1e-8
            assert abs(Nf_q - m.N_f) / max(m.N_f, 1e-30) < 1e-6

    def test_deep_fiber_mode_airy_scaling(self):
        # deep-fiber mode: quadrature over the fiber matches the closed form
        # to 1e-6 relative and dominates the total norm
        table = find_modes(GEO, (3.0, 3.0 + 6 * GEO.fsr), parity="odd")
        deep = min(table, key=lambda m: m.cavity_fraction)
        _, Nf_q = quad_norms(GEO, deep)
        assert abs(Nf_q - deep.N_f) / deep.N_f < 1e-6
        assert deep.N_f / deep.N > 0.5

    def test_total_norm_identity(self):
        table = find_modes(GEO, (3.0, 3.0 + 4 * GEO.fsr))
        for m in table:
            assert m.N == m.N_c * 2 + m.N_f
            assert 0.0 <= m.cavity_fraction <= 1.0


class TestModeFunction:
    def test_boundary_zeros_and_parity(self):
        table = find_modes(GEO, (3.0, 3.0 + 4 * GEO.fsr))
        Z = GEO.Z
        zs = np.linspace(-Z, Z, 501)
        for m in table:
            assert abs(mode_function(GEO, m, -Z)) < 1e-9
            assert abs(mode_function(GEO, m, Z)) < 1e-9
            v = mode_function(GEO, m, zs)
            vr = mode_function(GEO, m, -zs)
            sign = 1.0 if m.parity == "even" else -1.0
            assert np.max(np.abs(v - sign * vr)) < 1e-8 * np.max(np.abs(v))

    def test_rejects_outside_box(self):
        table = find_modes(GEO, (3.0, 3.0 + 2 * GEO.fsr))
        with pytest.raises(ValueError):
            mode_function(GEO, table[0], GEO.Z * 1.5)

    def test_orthonormality_window(self):
        # overlap matrix of neighboring modes deviates from identity < 1e-6;
        # quadrature runs per region (the field jumps at the sheets)
        table = find_modes(GEO, (3.0, 3.0 + 8 * GEO.fsr))
        modes = list(table)
        Z, hL = GEO.Z, GEO.L / 2
        eps = 1e-15
        regions = [(-Z + eps, -hL - eps), (-hL + eps, hL - eps), (hL + eps, Z - eps)]
        kmax = modes[-1].k
        for i, mi in enumerate(modes):
            for mj in modes[i:]:
                f = lambda z: mode_function(GEO, mi, z) * mode_function(GEO, mj, z)
                ov = sum(gauss_quad(f, a, b, max(int(kmax * (b - a)), 16))
                         for a, b in regions)
                target = 1.0 if mi is mj else 0.0
                assert abs(ov - target) < 1e-6

    def test_cavity_fraction_sum_rule_full_scale(self):
        # fractions over a window holding one cavity resonance sum to ~1 per parity
        kc = cavity_line_wavenumbers(FULL_GEO, K0 - np.pi / FULL_GEO.l, K0 + np.pi / FULL_GEO.l)
        kc = kc[np.argmin(np.abs(kc - K0))]
        table = find_modes(FULL_GEO, (kc - 14 * FULL_GEO.fsr, kc + 14 * FULL_GEO.fsr))
        for par in ("even", "odd"):
            s = sum(m.cavity_fraction for m in table.of_parity(par))
            assert abs(s - 1.0) < 0.05
