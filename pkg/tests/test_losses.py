"""Loss model: per-mode rates and cross couplings."""
import numpy as np
import pytest

from cavlink.losses import LossMatrix, LossParams, build_loss
from cavlink.modes import Geometry, cavity_line_wavenumbers, find_modes

LAM = 852e-9
K0 = 2 * np.pi / LAM


@pytest.fixture(scope="module")
def table():
    geo = Geometry(l=1e-5, L=1.0, mu=500.0 / K0)
    lines = cavity_line_wavenumbers(geo, K0 - np.pi / geo.l, K0 + np.pi / geo.l)
    kc = lines[np.argmin(np.abs(lines - K0))]
    return find_modes(geo, (kc - 6 * geo.fsr, kc + 6 * geo.fsr))


class TestBuildLoss:
    def test_equal_rates_no_cross_coupling(self, table):
        # gamma_c = gamma_f -> gamma_i = gamma for all modes and C = 0 exactly
        loss = build_loss(table, LossParams(gamma_c=3e7, gamma_f=3e7))
        assert np.all(loss.gamma == 3e7)
        assert np.all(loss.C_dense() == 0.0)

    def test_weighted_average(self, table):
        gc, gf = 3e7, 2e5
        loss = build_loss(table, LossParams(gamma_c=gc, gamma_f=gf))
        f = table.cavity_fraction
        assert np.allclose(loss.gamma, f * gc + (1 - f) * gf, rtol=1e-14)
        assert np.all(loss.gamma >= min(gc, gf))
        assert np.all(loss.gamma <= max(gc, gf))

    def test_pure_cavity_mode_endpoint(self, table):
        # a synthetic fraction-1 mode decays at exactly gamma_c
        gc = 3e7
        loss = build_loss(table, LossParams(gamma_c=gc, gamma_f=0.0))
        i = int(np.argmax(table.cavity_fraction))
        f = table.cavity_fraction[i]
        assert loss.gamma[i] == pytest.approx(f * gc, rel=1e-14)

    def test_cross_coupling_values_and_structure(self, table):
        gc = 3e7
        loss = build_loss(table, LossParams(gamma_c=gc, gamma_f=0.0))
        C = loss.C_dense()
        f = table.cavity_fraction
        par = table.parity
        n = len(table)
        for i in range(n):
            for j in range(n):
                if i == j:
                    assert C[i, j] == 0.0
                elif par[i] == par[j]:
                    # gamma_f = 0: C_ij = -i gamma_c sqrt(f_i f_j)
                    assert C[i, j] == pytest.approx(-1j * gc * np.sqrt(f[i] * f[j]), rel=1e-12)
                else:
                    assert C[i, j] == 0.0
        # symmetric, purely imaginary, i*C real with sign of (gamma_c - gamma_f)
        assert np.allclose(C, C.T)
        assert np.max(np.abs(C.real)) == 0.0
        iC = (1j * C).real
        assert np.all(iC >= -1e-30)

    def test_rejects_negative_rates(self):
        with pytest.raises(ValueError):
            LossParams(gamma_c=-1.0, gamma_f=0.0)

    def test_fiber_rate_independent_of_length(self):
        # matched deep-fiber modes in L and 2L geometries decay at the same
        # rate within 1%
        l, mu = 1e-5, 500.0 / K0
        gf = 2e5
        rates = []
        for L in (1.0, 2.0):
            geo = Geometry(l=l, L=L, mu=mu)
            lines = cavity_line_wavenumbers(geo, K0 - np.pi / l, K0 + np.pi / l)
            kc = lines[np.argmin(np.abs(lines - K0))]
            # a window between cavity resonances: all modes deep-fiber
            t = find_modes(geo, (kc + 40 * geo.fsr, kc + 44 * geo.fsr))
            loss = build_loss(t, LossParams(gamma_c=0.0, gamma_f=gf))
            deep = loss.gamma[np.argmin(t.cavity_fraction)]
            rates.append(deep)
        assert abs(rates[0] - rates[1]) / rates[0] < 0.01


class TestDampingGenerator:
    def test_positive_semidefinite_damping(self, table):
        # the damping generator gamma/2 diag - i C/2 assembled per the half
        # convention is PSD; no mode superposition can grow
        for gc, gf in ((3e7, 0.0), (0.0, 2e5), (3e7, 2e5), (1e5, 1e7)):
            loss = build_loss(table, LossParams(gamma_c=gc, gamma_f=gf))
            X = 0.5
            M = X * np.diag(loss.gamma).astype(complex)
            M += 1j * X * loss.C_dense()   # i*C is the real mixing block
            eig = np.linalg.eigvalsh((M + M.conj().T) / 2)
            assert eig.min() > -1e-8 * max(gc, gf, 1.0)
