"""Figure-reproduction pipelines: sweep drivers that emit CSVs plus a
machine-checkable assertions.txt recording which qualitative claims held."""
from __future__ import annotations

import os
import warnings

import numpy as np
from scipy.constants import c as C_LIGHT

from .config import ConfigError, ScenarioConfig
from .csvio import write_csv
from .modes import Geometry, cavity_line_wavenumbers, find_modes
from .runner import build_scenario, run_single, write_modes_csv


def _write_assertions(out_dir, checks):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "assertions.txt"), "w") as f:
        for passed, claim in checks:
            f.write(("PASS " if passed else "FAIL ") + claim + "\n")
    return all(p for p, _ in checks)


def figure_1(cfg: ScenarioConfig, out_dir: str):
    """Cavity mode content vs mode index for L/l = 1e5 and 1e5 - 1/3."""
    lam = cfg.float_("geometry.lambda_m", positive=True)
    l = cfg.float_("geometry.l_m", positive=True)
    k0 = 2 * np.pi / lam
    mu_m = cfg.float_or_auto("geometry.mu_m")
    mu = mu_m if mu_m is not None else cfg.float_("geometry.mu_k0") / k0
    checks = []
    for tag, ratio in (("a", 1e5), ("b", 1e5 - 1.0 / 3.0)):
        geo = Geometry(l=l, L=ratio * l, mu=mu)
        lines = cavity_line_wavenumbers(geo, k0 - np.pi / l, k0 + np.pi / l)
        k_line = float(lines[np.argmin(np.abs(lines - k0))])
        half = 30 * geo.fsr
        n_ref = int(round(k_line * geo.L / np.pi)) - 60
        table = find_modes(geo, (k_line - half, k_line + half),
                           index_reference=n_ref)
        write_modes_csv(os.path.join(out_dir, f"fig1_modes_{tag}.csv"), table)
        for par in ("even", "odd"):
            fr = np.array([m.cavity_fraction for m in table.of_parity(par)])
            checks.append((fr.max() > 0.3,
                           f"fig1[{tag}]: {par} branch shows a cavity resonance peak"))
            checks.append((abs(fr.sum() - 1.0) < 0.1,
                           f"fig1[{tag}]: {par} cavity weight in window sums to ~1"))
    ok = _write_assertions(out_dir, checks)
    return checks, ok


def _figure_point(cfg, **overrides):
    point = cfg.copy()
    for key, value in overrides.items():
        point.set(key, value)
    report, _, _ = run_single(point, write_outputs=False)
    return report


def _with_long_pulse(point_cfg, L, L_eff):
    # longer pulses above the multimode threshold, per the operating recipe
    if L > L_eff:
        point_cfg["pulses.T_kappa_c"] = 40.0
    return point_cfg


def figure_2(cfg: ScenarioConfig, out_dir: str, L_values=None):
    """Normalized field dwell time R vs fiber length (lossless, optimized)."""
    scn_probe = build_scenario(cfg)
    L_eff = scn_probe.L_eff
    if L_values is None:
        L_values = np.geomspace(1e-3, 10.0, 13)
    rows = []
    for L in L_values:
        over = {"geometry.L_m": repr(float(L)), "loss.gamma_c_per_s": 0.0,
                "loss.gamma_f_per_s": 0.0}
        over = _with_long_pulse(over, L, L_eff)
        rep = _figure_point(cfg, **over)
        rows.append((float(L), rep.R, rep.P, rep.T_s * rep.kappa_c_rad_s,
                     rep.n_modes_used))
    write_csv(os.path.join(out_dir, "fig2_dwell.csv"),
              ["L_m", "R", "P", "T_kappa_c", "n_modes"], rows, kind="fig2")
    Ls = np.array([r[0] for r in rows])
    Rs = np.array([r[1] for r in rows])
    checks = [(bool(Rs[Ls <= 0.011].min() < 1.0),
               "fig2: R < 1 below the multimode threshold")]
    above = np.nonzero(Rs >= 0.8)[0]
    if len(above) and above[0] > 0:
        lo, hi = Ls[above[0] - 1], Ls[above[0]]
        ok_cross = lo <= 4 * L_eff and hi >= L_eff / 4
        checks.append((bool(ok_cross),
                       f"fig2: R rises through ~1 near L_eff (crossing in [{lo:.3g}, {hi:.3g}] m)"))
    ok = _write_assertions(out_dir, checks)
    return rows, checks, ok


def figure_3(cfg: ScenarioConfig, out_dir: str, gamma_values=None, L_m=1.0):
    """log10 P vs cavity loss rate for the two tuning strategies, gamma_f = 0.

    Runs in the parity-split geometry (length realized so the dominant
    parity's weight is shared with the next same-parity mode): the two
    tuning strategies address the strongly-coupled pair, with strategy
    windows local to each mode (on resonance +-3 kappa_c for the cavity-like
    mode, +-0.45 of the pair gap around the neighbor).
    """
    if gamma_values is None:
        gamma_values = np.geomspace(1e5, 1e9, 9)
    base = cfg.copy()
    base.set("geometry.L_m", repr(float(L_m)))
    base.set("geometry.alignment", "pair_split")
    probe = build_scenario(base)
    kap = probe.kappa_c
    from .optimize import resolve_mode_selector
    m1 = resolve_mode_selector(probe.table, "most_cavity_like")
    m2 = resolve_mode_selector(probe.table, "neighbor_same_parity")
    gap = abs(m2.k - m1.k) * C_LIGHT
    windows = {"most_cavity_like": 3.0 * kap, "neighbor_same_parity": 0.45 * gap}
    rows = []
    for gc in gamma_values:
        reps = {}
        for name, sel in (("cavity_like", "most_cavity_like"),
                          ("neighbor", "neighbor_same_parity")):
            rep = _figure_point(
                base, **{"loss.gamma_c_per_s": repr(float(gc)),
                         "loss.gamma_f_per_s": 0.0,
                         "laser.target_mode": sel,
                         "optimize.detuning_span_rad_s": repr(windows[sel])})
            reps[name] = rep
        rows.append((float(gc), reps["cavity_like"].P, reps["neighbor"].P,
                     reps["cavity_like"].P1))
    write_csv(os.path.join(out_dir, "fig3_cavity_loss.csv"),
              ["gamma_c_per_s", "P_cavity_like", "P_neighbor", "P1"], rows,
              kind="fig3")
    gcs = np.array([r[0] for r in rows])
    i = int(np.argmin(np.abs(gcs - 3e7)))
    checks = [
        (bool(rows[i][1] > rows[i][3] + 1e-3),
         "fig3: optimized transfer beats the sequential-loss bound P1"),
        (bool(rows[i][2] > rows[i][1] - 1e-3),
         "fig3: neighbor-mode tuning matches or beats cavity-like tuning"),
    ]
    ok = _write_assertions(out_dir, checks)
    return rows, checks, ok


def figure_4(cfg: ScenarioConfig, out_dir: str, gamma_values=None, L_values=None):
    """log10 P vs fiber loss rate with gamma_c = gamma_f, several lengths."""
    if gamma_values is None:
        gamma_values = np.geomspace(1e4, 1e8, 5)
    if L_values is None:
        L_values = [0.01, 1.0, 8.0]
    scn_probe = build_scenario(cfg)
    L_eff = scn_probe.L_eff
    rows = []
    for L in L_values:
        for g in gamma_values:
            over = {"geometry.L_m": repr(float(L)),
                    "loss.gamma_c_per_s": repr(float(g)),
                    "loss.gamma_f_per_s": repr(float(g))}
            over = _with_long_pulse(over, L, L_eff)
            rep = _figure_point(cfg, **over)
            rows.append((float(g), float(L), rep.P, rep.P1))
    write_csv(os.path.join(out_dir, "fig4_fiber_loss.csv"),
              ["gamma_per_s", "L_m", "P", "P1"], rows, kind="fig4")
    checks = []
    small = [r for r in rows if r[1] <= 0.011 and 1e5 <= r[0] <= 1e7]
    if small:
        checks.append((all(r[2] > r[3] + 1e-3 for r in small),
                       "fig4: P beats P1 at L = 0.01 for moderate loss"))
    big = [r for r in rows if r[1] >= 7.9 and 1e5 <= r[0] <= 1e7]
    if big:
        checks.append((all(abs(np.log10(r[2]) - np.log10(r[3])) < 0.05 for r in big),
                       "fig4: log10 P tracks log10 P1 at L = 8 within 0.05"))
    ok = _write_assertions(out_dir, checks)
    return rows, checks, ok


def run_figure(figure_id: int, cfg: ScenarioConfig, out_dir: str, **kw):
    os.makedirs(out_dir, exist_ok=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        if figure_id == 1:
            return figure_1(cfg, out_dir)
        if figure_id == 2:
            return figure_2(cfg, out_dir, **kw)
        if figure_id == 3:
            return figure_3(cfg, out_dir, **kw)
        if figure_id == 4:
            return figure_4(cfg, out_dir, **kw)
    raise ConfigError(f"figure id must be 1..4, got {figure_id}")
