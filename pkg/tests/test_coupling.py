"""Atom-field couplings, pulses, detunings, Stark shifts."""
import numpy as np
import pytest
from scipy.constants import c as C_LIGHT

from cavlink.coupling import (
    AtomParams,
    PulseSchedule,
    SystemParams,
    antinode_position,
    coupling_g,
    coupling_vector,
    effective_G,
    mode_detuning,
    pulse_value,
    stark_shift,
)
from cavlink.modes import Geometry, Mode, cavity_line_wavenumbers, find_modes

G_MAX = 2 * np.pi * 100e6
DELTA = 2 * np.pi * 500e6
LAM = 852e-9
K0 = 2 * np.pi / LAM


def synthetic_mode(k, parity, N):
    return Mode(k=k, k_lo=0.0, parity=parity, index_n=0, n_continuous=0.0,
                N_c=N / 2, N_f=0.0, N=N, cavity_fraction=1.0, phase_kL=0.0,
                residual_rad=0.0)


@pytest.fixture(scope="module")
def full_scale_table():
    geo = Geometry(l=1e-5, L=1.0, mu=500.0 / K0)
    lines = cavity_line_wavenumbers(geo, K0 - np.pi / geo.l, K0 + np.pi / geo.l)
    kc = lines[np.argmin(np.abs(lines - K0))]
    return geo, find_modes(geo, (kc - 8 * geo.fsr, kc + 8 * geo.fsr))


class TestCouplingG:
    def test_atom_at_node_decouples(self):
        geo = Geometry(l=2.0, L=30.0, mu=0.8)
        m = synthetic_mode(k=np.pi, parity="even", N=2 * geo.l)
        atom = AtomParams(s=1.0, g_max=G_MAX, Delta=DELTA, side="A")  # k*s = pi
        assert coupling_g(m, atom, geo) == pytest.approx(0.0, abs=G_MAX * 1e-12)

    def test_pure_cavity_calibration(self):
        # fully localized single-cavity mode (N = 2l) at an antinode -> g_max
        geo = Geometry(l=2.0, L=30.0, mu=0.8)
        m = synthetic_mode(k=np.pi, parity="even", N=2 * geo.l)
        atom = AtomParams(s=0.5, g_max=G_MAX, Delta=DELTA, side="A")  # k*s = pi/2
        assert coupling_g(m, atom, geo) == pytest.approx(G_MAX, rel=1e-12)

    def test_resonant_pair_couples_at_gmax_over_sqrt2(self, full_scale_table):
        # symmetric geometry: the cavity weight splits over the parity pair
        geo, table = full_scale_table
        best = max(table, key=lambda m: m.cavity_fraction)
        s = antinode_position(best.k, geo.l)
        atom = AtomParams(s=s, g_max=G_MAX, Delta=DELTA, side="A")
        g = abs(coupling_g(best, atom, geo))
        assert abs(g - G_MAX / np.sqrt(2)) < 0.1 * G_MAX

    def test_parity_sign_structure(self, full_scale_table):
        # mirror-symmetric atoms: g_A*g_B > 0 on even modes, < 0 on odd
        geo, table = full_scale_table
        s = antinode_position(max(table, key=lambda m: m.cavity_fraction).k, geo.l)
        A = AtomParams(s=s, g_max=G_MAX, Delta=DELTA, side="A")
        B = AtomParams(s=s, g_max=G_MAX, Delta=DELTA, side="B")
        for m in table:
            prod = coupling_g(m, A, geo) * coupling_g(m, B, geo)
            if abs(prod) < (1e-9 * G_MAX) ** 2:
                continue
            assert (prod > 0) == (m.parity == "even")

    def test_calibration_consistency_window(self, full_scale_table):
        # max |g| over a window holding one resonance: sqrt(f_peak/2)*g_max.
        # Comb-aligned geometries put essentially all the parity weight in one
        # mode, landing exactly in [g_max/sqrt2, g_max]; the generic symmetric
        # geometry leaks ~20% of the weight into comb tails, so the bound
        # carries the sqrt(f_peak) factor.
        geo, table = full_scale_table
        best = max(table, key=lambda m: m.cavity_fraction)
        s = antinode_position(best.k, geo.l)
        A = AtomParams(s=s, g_max=G_MAX, Delta=DELTA, side="A")
        gmax_seen = np.max(np.abs(coupling_vector(table, A)))
        assert np.sqrt(best.cavity_fraction) * G_MAX / np.sqrt(2) * 0.999 \
            <= gmax_seen <= G_MAX * 1.0000001

        # comb-aligned sparse-comb realization (short L): the peak mode holds
        # essentially the whole parity weight and the full-range statement
        # [g_max/sqrt2, g_max] holds outright
        geo1 = Geometry(l=geo.l, L=0.01, mu=geo.mu)
        kline = cavity_line_wavenumbers(geo1, K0 - np.pi / geo1.l, K0 + np.pi / geo1.l)
        kline = float(kline[np.argmin(np.abs(kline - K0))])
        frac = (kline * geo1.L / np.pi) % 1.0
        L_ali = geo1.L - (frac if frac <= 0.5 else frac - 1.0) * np.pi / kline
        geo2 = Geometry(l=geo.l, L=L_ali, mu=geo.mu)
        lines = cavity_line_wavenumbers(geo2, K0 - np.pi / geo2.l, K0 + np.pi / geo2.l)
        kc = lines[np.argmin(np.abs(lines - K0))]
        table2 = find_modes(geo2, (kc - 4 * geo2.fsr, kc + 4 * geo2.fsr))
        best2 = max(table2, key=lambda m: m.cavity_fraction)
        assert best2.cavity_fraction > 0.99
        s2 = antinode_position(best2.k, geo2.l)
        A2 = AtomParams(s=s2, g_max=G_MAX, Delta=DELTA, side="A")
        g2 = np.max(np.abs(coupling_vector(table2, A2)))
        assert G_MAX / np.sqrt(2) * 0.995 <= g2 <= G_MAX * 1.0000001


class TestEffectiveG:
    def test_zero_rabi(self):
        geo = Geometry(l=2.0, L=30.0, mu=0.8)
        m = synthetic_mode(k=np.pi, parity="even", N=2 * geo.l)
        atom = AtomParams(s=0.5, g_max=G_MAX, Delta=DELTA, side="A")
        assert effective_G(m, atom, 0.0, geo) == 0.0

    def test_substitution(self):
        geo = Geometry(l=2.0, L=30.0, mu=0.8)
        m = synthetic_mode(k=np.pi, parity="even", N=2 * geo.l)
        atom = AtomParams(s=0.5, g_max=G_MAX, Delta=5 * G_MAX, side="A")
        # g = g_max, Omega = g_max, Delta = 5 g_max -> G = g_max/10
        assert effective_G(m, atom, G_MAX, geo) == pytest.approx(G_MAX / 10, rel=1e-12)

    def test_operating_point(self):
        # G_max = g_max * Omega0 / (2 Delta) at the g = g_max calibration point
        geo = Geometry(l=2.0, L=30.0, mu=0.8)
        m = synthetic_mode(k=np.pi, parity="even", N=2 * geo.l)
        atom = AtomParams(s=0.5, g_max=G_MAX, Delta=DELTA, side="A")
        Om = 2 * np.pi * 50e6
        assert effective_G(m, atom, Om, geo) == pytest.approx(G_MAX * Om / (2 * DELTA))


class TestStark:
    def test_values(self):
        assert stark_shift(0.0, DELTA) == 0.0
        om = 2 * np.pi * 100e6
        # Omega/2pi = 100 MHz, Delta/2pi = 500 MHz -> shift/2pi = 5 MHz
        assert stark_shift(om, DELTA) == pytest.approx(2 * np.pi * 5e6, rel=1e-12)
        with pytest.raises(ValueError):
            stark_shift(om, 0.0)


class TestPulseSchedule:
    def test_peak_value_and_width(self):
        p = PulseSchedule(Omega0_A=1e9, Omega0_B=2e9, T=1e-7, tau=1.2e-7,
                          travel_time=1e-11)
        assert pulse_value(p, "A", p.t_peak_A) == pytest.approx(1e9)
        assert pulse_value(p, "B", p.t_peak_B) == pytest.approx(2e9)
        assert pulse_value(p, "B", p.t_peak_B + p.T) == pytest.approx(2e9 / np.e)

    def test_receiver_pulse_leads(self):
        # tau > L/c: the receiving atom's pulse (B) peaks first -- the
        # adiabatic-passage ordering (see the decisions ledger on the
        # source formula's sign)
        p = PulseSchedule(Omega0_A=1e9, Omega0_B=1e9, T=1e-7, tau=1.2e-7,
                          travel_time=3.3e-11)
        assert p.t_peak_A > p.t_peak_B
        assert p.t_peak_A - p.t_peak_B == pytest.approx(p.tau - p.travel_time)

    def test_swap_time_reversal_maps_schedule_onto_itself(self):
        p = PulseSchedule(Omega0_A=1e9, Omega0_B=1e9, T=1e-7, tau=1.3e-7,
                          travel_time=2e-11)
        # reflect time about the mid-point of the two peaks and swap sides
        mid = 0.5 * (p.t_peak_A + p.t_peak_B)
        ts = np.linspace(-5e-7, 5e-7, 101)
        vA = pulse_value(p, "A", ts)
        vB_reflected = pulse_value(p, "B", 2 * mid - ts)
        assert np.allclose(vA, vB_reflected, rtol=1e-12, atol=0)

    def test_validation(self):
        with pytest.raises(ValueError):
            PulseSchedule(Omega0_A=1.0, Omega0_B=1.0, T=0.0, tau=1.0)
        p = PulseSchedule(Omega0_A=1.0, Omega0_B=1.0, T=1.0, tau=1.0)
        with pytest.raises(ValueError):
            pulse_value(p, "C", 0.0)


class TestDetuning:
    def test_on_resonance(self):
        m = synthetic_mode(k=K0, parity="even", N=1.0)
        assert mode_detuning(m, C_LIGHT * K0) == pytest.approx(0.0, abs=1e-3)

    def test_sign(self):
        m = synthetic_mode(k=K0, parity="even", N=1.0)
        assert mode_detuning(m, C_LIGHT * K0 + 1e8) == pytest.approx(1e8, rel=1e-6)


class TestSystemParams:
    def test_derived_quantities(self):
        geo = Geometry(l=1e-5, L=0.01, mu=500.0 / K0)
        A = AtomParams(s=5e-6, g_max=G_MAX, Delta=DELTA, side="A")
        B = AtomParams(s=5e-6, g_max=G_MAX, Delta=DELTA, side="B")
        p = PulseSchedule(Omega0_A=1e9, Omega0_B=1e9, T=1e-7, tau=1.2e-7)
        sysp = SystemParams(lam=LAM, geometry=geo, gamma_c=0.0, gamma_f=0.0,
                            atom_A=A, atom_B=B, pulses=p)
        assert sysp.t_squared == pytest.approx(1.6e-5, rel=1e-3)
        assert sysp.kappa_c == pytest.approx(C_LIGHT * sysp.t_squared / 2e-5, rel=1e-12)
        assert sysp.L_eff == pytest.approx(1e-5 / sysp.t_squared, rel=1e-12)

    def test_atom_outside_cavity_rejected(self):
        geo = Geometry(l=1e-5, L=0.01, mu=500.0 / K0)
        A = AtomParams(s=2e-5, g_max=G_MAX, Delta=DELTA, side="A")
        B = AtomParams(s=5e-6, g_max=G_MAX, Delta=DELTA, side="B")
        p = PulseSchedule(Omega0_A=1e9, Omega0_B=1e9, T=1e-7, tau=1.2e-7)
        sysp = SystemParams(lam=LAM, geometry=geo, gamma_c=0.0, gamma_f=0.0,
                            atom_A=A, atom_B=B, pulses=p)
        with pytest.raises(ValueError):
            sysp.validate()

    def test_adiabatic_regime_warning(self):
        with pytest.warns(UserWarning):
            AtomParams(s=5e-6, g_max=G_MAX, Delta=2 * G_MAX, side="A")


class TestAntinode:
    def test_antinode_is_antinode(self):
        l = 1e-5
        s = antinode_position(K0, l)
        assert 0 < s < l
        assert abs(abs(np.sin(K0 * s)) - 1.0) < 1e-9
