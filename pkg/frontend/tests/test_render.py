"""Renderer: schema handling, figure structure, deterministic output."""
import os
import subprocess
import sys

import numpy as np
import pytest

from figrender import FigureSpec, SchemaError, build_figure, render


def write_csv(path, header, rows):
    with open(path, "w") as f:
        f.write("# test fixture generated=2000-01-01T00:00:00+00:00\n")
        f.write(",".join(header) + "\n")
        for r in rows:
            f.write(",".join(str(x) for x in r) + "\n")


@pytest.fixture
def modes_csv(tmp_path):
    # synthetic resonance profile: Lorentzian cavity content, both parities
    path = tmp_path / "fig1_modes_a.csv"
    rows = []
    for n in range(40, 81):
        par = "even" if n % 2 == 0 else "odd"
        f = 0.8 / (1 + ((n - 60) / 1.5) ** 2) + 1e-5
        rows.append((float(n), par, 7.3e6 + n, 2e-5, 4e-5 / f, f))
    write_csv(path, ["n", "parity", "k_per_m", "N_c_m", "N_f_m", "cavity_fraction"], rows)
    return str(path)


@pytest.fixture
def dwell_csv(tmp_path):
    path = tmp_path / "fig2_dwell.csv"
    Ls = np.geomspace(1e-3, 10, 9)
    rows = [(L, 1 / (1 + (0.6 / L)), 0.999, 20.0, 30) for L in Ls]
    write_csv(path, ["L_m", "R", "P", "T_kappa_c", "n_modes"], rows)
    return str(path)


@pytest.fixture
def fig3_csv(tmp_path):
    path = tmp_path / "fig3_cavity_loss.csv"
    gs = np.geomspace(1e5, 1e9, 7)
    kappa = 2.4e8
    rows = [(g, max((kappa / (kappa + g)) ** 1.2, 1e-4),
             max((kappa / (kappa + g)) ** 0.8, 1e-4),
             (kappa / (kappa + g)) ** 2) for g in gs]
    write_csv(path, ["gamma_c_per_s", "P_cavity_like", "P_neighbor", "P1"], rows)
    return str(path)


@pytest.fixture
def fig4_csv(tmp_path):
    path = tmp_path / "fig4_fiber_loss.csv"
    rows = []
    for L in (0.01, 8.0):
        for g in np.geomspace(1e4, 1e8, 6):
            P1 = (2.4e8 / (2.4e8 + g)) ** 2 * np.exp(-g * L / 3e8)
            rows.append((g, L, min(1.0, P1 * 1.1), P1))
    write_csv(path, ["gamma_per_s", "L_m", "P", "P1"], rows)
    return str(path)


class TestBuildFigure:
    def test_fig1_parity_markers_and_peak(self, modes_csv, tmp_path):
        fig = build_figure(FigureSpec(1, [modes_csv, modes_csv],
                                      str(tmp_path / "f1.svg")))
        assert len(fig.axes) == 2
        ax = fig.axes[0]
        assert len(ax.lines) == 2    # one marker set per parity
        markers = {ln.get_marker() for ln in ax.lines}
        assert len(markers) == 2     # distinct even/odd markers
        ys = np.concatenate([ln.get_ydata() for ln in ax.lines])
        assert ys.max() > 0.5 and np.median(ys) < 0.05   # one resonance peak

    def test_fig2_guide_line(self, dwell_csv, tmp_path):
        fig = build_figure(FigureSpec(2, [dwell_csv], str(tmp_path / "f2.svg"),
                                      L_eff_m=0.625))
        ax = fig.axes[0]
        assert ax.get_xscale() == "log"
        xs = [ln.get_xdata() for ln in ax.lines]
        assert any(np.allclose(x, 0.625) for x in xs if len(np.atleast_1d(x)) == 2)

    def test_fig3_reference_dashed(self, fig3_csv, tmp_path):
        fig = build_figure(FigureSpec(3, [fig3_csv], str(tmp_path / "f3.svg")))
        ax = fig.axes[0]
        styles = [ln.get_linestyle() for ln in ax.lines]
        assert styles.count("--") == 1
        assert len(ax.lines) == 3

    def test_fig4_curve_per_length_with_references(self, fig4_csv, tmp_path):
        fig = build_figure(FigureSpec(4, [fig4_csv], str(tmp_path / "f4.svg")))
        ax = fig.axes[0]
        solid = [ln for ln in ax.lines if ln.get_linestyle() == "-"]
        dashed = [ln for ln in ax.lines if ln.get_linestyle() == "--"]
        assert len(solid) == 2 and len(dashed) == 2


class TestRender:
    def test_deterministic_bytes(self, fig3_csv, tmp_path):
        out1 = str(tmp_path / "a.svg")
        out2 = str(tmp_path / "b.svg")
        render(FigureSpec(3, [fig3_csv], out1))
        render(FigureSpec(3, [fig3_csv], out2))
        assert open(out1, "rb").read() == open(out2, "rb").read()

    def test_empty_csv_no_output(self, tmp_path):
        bad = tmp_path / "empty.csv"
        bad.write_text("# header only\nL_m,R\n")
        out = tmp_path / "f2.svg"
        with pytest.raises(SchemaError):
            render(FigureSpec(2, [str(bad)], str(out)))
        assert not out.exists()

    def test_schema_mismatch_names_column(self, tmp_path):
        bad = tmp_path / "bad.csv"
        write_csv(bad, ["L_m", "Q"], [(0.1, 0.5)])
        with pytest.raises(SchemaError, match="'R'"):
            build_figure(FigureSpec(2, [str(bad)], str(tmp_path / "x.svg")))

    def test_all_four_figures_render(self, modes_csv, dwell_csv, fig3_csv,
                                      fig4_csv, tmp_path):
        specs = [
            FigureSpec(1, [modes_csv], str(tmp_path / "f1.svg")),
            FigureSpec(2, [dwell_csv], str(tmp_path / "f2.svg")),
            FigureSpec(3, [fig3_csv], str(tmp_path / "f3.svg")),
            FigureSpec(4, [fig4_csv], str(tmp_path / "f4.svg")),
        ]
        for spec in specs:
            out = render(spec)
            assert os.path.getsize(out) > 2000


class TestCli:
    def test_cli_roundtrip(self, fig3_csv, tmp_path):
        out = str(tmp_path / "f3.svg")
        res = subprocess.run(
            [sys.executable, "-m", "figrender.cli", "--figure", "3",
             "--in", fig3_csv, "--out", out],
            capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        assert os.path.exists(out)

    def test_cli_error_exit(self, tmp_path):
        res = subprocess.run(
            [sys.executable, "-m", "figrender.cli", "--figure", "2",
             "--in", str(tmp_path / "missing.csv"),
             "--out", str(tmp_path / "x.svg")],
            capture_output=True, text=True)
        assert res.returncode == 1
