"""Scenario execution: mode solve -> loss build -> (optimize) -> integrate.

The requested fiber length is by default realized as the nearest
comb-aligned length: the cavity quasi-resonance is placed on a resonance
of the fiber section by trimming L within half a comb period (sub-micron;
any physical link is stabilized at this level, and the transfer quality
depends on the alignment this strongly only below the multimode threshold
L_eff).  ``geometry.alignment = exact`` disables the trim.
"""
from __future__ import annotations

import os
import time
import warnings
from dataclasses import dataclass, asdict

import numpy as np
from scipy.constants import c as C_LIGHT

from .config import ConfigError, ScenarioConfig
from .coupling import (AtomParams, PulseSchedule, SystemParams,
                       antinode_position, coupling_g)
from .csvio import write_csv
from .dynamics import (dwell_ratio, integrate, p1_bound, transfer_probability)
from .losses import LossMatrix, LossParams, build_loss
from .modes import Geometry, ModeTable, cavity_line_wavenumbers, find_modes
from .optimize import OptimizationProblem, OptimizationResult, optimize_transfer, resolve_mode_selector


@dataclass
class RunReport:
    """Derived quantities are recomputed from config primitives, never copied."""

    lambda_m: float
    l_m: float
    L_requested_m: float
    L_m: float                 # realized (comb-aligned unless disabled)
    mu_m: float
    t_squared: float
    kappa_c_rad_s: float
    L_eff_m: float
    gamma_c_per_s: float
    gamma_f_per_s: float
    F_c: float
    P1: float
    T_s: float
    tau_s: float
    target_mode_k: float
    target_parity: str
    target_cavity_fraction: float
    omega_L_rad_s: float
    detuning_rad_s: float
    Omega0_A_rad_s: float
    Omega0_B_rad_s: float
    G_max_rad_s: float
    n_modes_table: int
    n_modes_used: int
    mode_window_rad_s: float
    converged: bool
    convergence_delta_P: float
    P: float
    R: float
    optimizer_evals: int
    wall_time_s: float

    def lines(self):
        d = asdict(self)
        return [f"{k} = {d[k]!r}" for k in d]


@dataclass
class Scenario:
    """Assembled physical inputs for one configuration."""

    cfg: ScenarioConfig
    geometry: Geometry
    L_requested: float
    k_line: float
    kappa_c: float
    t_squared: float
    L_eff: float
    table: ModeTable
    target: object
    loss: LossMatrix | None
    system: SystemParams
    omega_L_center: float
    mode_window: float


def realize_geometry(cfg: ScenarioConfig):
    lam = cfg.float_("geometry.lambda_m", positive=True)
    l = cfg.float_("geometry.l_m", positive=True)
    L_req = cfg.float_("geometry.L_m", positive=True)
    k0 = 2 * np.pi / lam
    mu_m = cfg.float_or_auto("geometry.mu_m")
    mu = mu_m if mu_m is not None else cfg.float_("geometry.mu_k0", positive=True) / k0

    trial = Geometry(l=l, L=L_req, mu=mu)
    lines = cavity_line_wavenumbers(trial, k0 - np.pi / l, k0 + np.pi / l)
    if len(lines) == 0:
        raise ConfigError("geometry.mu_k0: no cavity quasi-resonance found near 2*pi/lambda")
    k_line = float(lines[np.argmin(np.abs(lines - k0))])

    L = L_req
    alignment = cfg.str_("geometry.alignment")
    # Sub-wavelength realization of the requested length (|dL| < half a comb
    # period).  comb_aligned puts the cavity line on a fiber-section
    # resonance (one parity keeps an unhybridized, fully cavity-like mode:
    # the configuration with a usable dark supermode at short L).
    # pair_split parks the line so the dominant-parity weight is shared
    # ~4:1 with the next same-parity mode above -- the '1'/'2' pair used by
    # the two tuning strategies.
    targets = {"comb_aligned": 0.0, "pair_split": 0.45}
    if alignment in targets:
        frac = (k_line * L_req / np.pi) % 1.0
        shift = (frac - targets[alignment] + 0.5) % 1.0 - 0.5
        L = L_req - shift * np.pi / k_line
    return Geometry(l=l, L=L, mu=mu), L_req, k_line, k0


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    geometry, L_req, k_line, k0 = realize_geometry(cfg)
    l, L = geometry.l, geometry.L
    t_sq = 4.0 / (4.0 + (geometry.mu * k0) ** 2)
    kappa_c = C_LIGHT * t_sq / (2 * l)
    L_eff = l / t_sq

    window = cfg.float_("modes.window_kappa_c", positive=True) * kappa_c
    margin = cfg.float_("modes.table_margin_fsr", positive=True)
    half = margin * geometry.fsr + window / C_LIGHT
    idx_ref = cfg.str_("modes.index_reference")
    index_reference = None if idx_ref == "auto" else int(idx_ref)
    table = find_modes(geometry, (k_line - half, k_line + half),
                       scan_per_fsr=cfg.int_("modes.scan_per_fsr", positive=True),
                       index_reference=index_reference)
    if len(table) == 0:
        raise ConfigError("modes.table_margin_fsr: no modes found in the table window")

    target = resolve_mode_selector(table, cfg.target_mode_selector())

    g_max = cfg.float_("atoms.g_max_rad_s", positive=True)
    Delta = cfg.float_("atoms.Delta_rad_s")
    s_A = cfg.float_or_auto("atoms.s_A_m", positive=True)
    s_B = cfg.float_or_auto("atoms.s_B_m", positive=True)
    s_auto = antinode_position(target.k, l)
    atom_A = AtomParams(s=s_A if s_A is not None else s_auto, g_max=g_max, Delta=Delta, side="A")
    atom_B = AtomParams(s=s_B if s_B is not None else s_auto, g_max=g_max, Delta=Delta, side="B")

    T_s = cfg.float_or_auto("pulses.T_s", positive=True)
    T = T_s if T_s is not None else cfg.float_("pulses.T_kappa_c", positive=True) / kappa_c
    tau = cfg.float_("pulses.tau_over_T") * T
    Om_A = cfg.float_or_auto("pulses.Omega0_rad_s", positive=True) or 0.0
    Om_B_raw = cfg.float_or_auto("pulses.Omega0_B_rad_s", positive=True)
    Om_B = Om_B_raw if Om_B_raw is not None else Om_A
    pulses = PulseSchedule(
        Omega0_A=Om_A, Omega0_B=Om_B, T=T, tau=tau, t_peak_B=0.0,
        travel_time=L / C_LIGHT,
        phase_compensation=cfg.bool_("pulses.phase_compensation"))

    gamma_c = cfg.float_("loss.gamma_c_per_s", nonnegative=True)
    gamma_f = cfg.float_("loss.gamma_f_per_s", nonnegative=True)
    loss = None
    if gamma_c > 0 or gamma_f > 0:
        loss = build_loss(table, LossParams(gamma_c=gamma_c, gamma_f=gamma_f))

    system = SystemParams(
        lam=cfg.float_("geometry.lambda_m"), geometry=geometry,
        gamma_c=gamma_c, gamma_f=gamma_f, atom_A=atom_A, atom_B=atom_B,
        pulses=pulses,
        laser_detuning_offset=cfg.float_("laser.detuning_rad_s"))
    system.validate()

    omega_L_center = C_LIGHT * (target.k + target.k_lo)
    return Scenario(cfg=cfg, geometry=geometry, L_requested=L_req, k_line=k_line,
                    kappa_c=kappa_c, t_squared=t_sq, L_eff=L_eff, table=table,
                    target=target, loss=loss, system=system,
                    omega_L_center=omega_L_center, mode_window=window)


def _default_omega_bounds(scn: Scenario):
    """Centered on the amplitude that gives the target mode an adiabatic
    pulse area (G*T ~ 3), two orders of magnitude total span."""
    g_sel = abs(coupling_g(scn.target, scn.system.atom_A, scn.geometry))
    g_sel = max(g_sel, 1e-6 * scn.system.atom_A.g_max)
    Delta = abs(scn.system.atom_A.Delta)
    T = scn.system.pulses.T
    Om_mid = 2.0 * Delta * (3.0 / T) / g_sel
    cap = scn.cfg.float_("optimize.omega_cap_Delta", positive=True) * Delta
    hi = min(Om_mid * 30.0, cap)
    lo = min(Om_mid / 30.0, hi / 900.0)
    return lo, hi


def evaluate_point(scn: Scenario, Omega0: float, detuning: float,
                   tail_cache: dict, Omega0_B: float | None = None,
                   record_modes: bool = False):
    cfg = scn.cfg
    pulses = scn.system.pulses.with_amplitudes(Omega0, Omega0_B)
    system = SystemParams(
        lam=scn.system.lam, geometry=scn.geometry, gamma_c=scn.system.gamma_c,
        gamma_f=scn.system.gamma_f, atom_A=scn.system.atom_A,
        atom_B=scn.system.atom_B, pulses=pulses,
        laser_detuning_offset=detuning)
    traj = integrate(
        system, scn.table, scn.loss, scn.omega_L_center + detuning,
        rtol=cfg.float_("integrate.rtol"), atol=cfg.float_("integrate.atol"),
        loss_convention=cfg.str_("loss.convention"),
        backend=cfg.str_("integrate.backend"),
        mode_window=scn.mode_window, record_modes=record_modes,
        _tail_cache=tail_cache)
    return traj


def run_single(cfg: ScenarioConfig, out_dir: str | None = None,
               write_outputs: bool = True):
    """Execute one scenario; returns (RunReport, Trajectory, OptimizationResult|None)."""
    t_start = time.time()
    scn = build_scenario(cfg)
    tail_cache = {}
    opt_result = None

    if cfg.bool_("optimize.enabled"):
        o_lo = cfg.float_or_auto("optimize.omega_lo_rad_s", positive=True)
        o_hi = cfg.float_or_auto("optimize.omega_hi_rad_s", positive=True)
        if o_lo is None or o_hi is None:
            a_lo, a_hi = _default_omega_bounds(scn)
            o_lo = o_lo if o_lo is not None else a_lo
            o_hi = o_hi if o_hi is not None else a_hi
        span_abs = cfg.float_or_auto("optimize.detuning_span_rad_s", positive=True)
        if span_abs is not None:
            span = span_abs
        else:
            span = cfg.float_("optimize.detuning_span_fsr", positive=True) * scn.geometry.fsr * C_LIGHT

        def objective(Om, det):
            traj = evaluate_point(scn, Om, det, tail_cache)
            P = float(abs(traj.final.c001) ** 2)
            aux = dwell_ratio(traj, scn.geometry.L, scn.kappa_c) if P > 1e-9 else float("inf")
            return P, aux

        problem = OptimizationProblem(
            objective=objective, omega_bounds=(o_lo, o_hi),
            detuning_bounds=(-span, span),
            grid=cfg.int_("optimize.grid", positive=True),
            max_evals=cfg.int_("optimize.max_evals", positive=True),
            prefer_min_amplitude_tol=cfg.float_("optimize.P_tolerance", nonnegative=True))
        opt_result = optimize_transfer(problem)
        Omega0 = opt_result.best_params["Omega0"]
        detuning = opt_result.best_params["detuning"]
        Omega0_B = Omega0
        if cfg.bool_("optimize.independent_amplitudes"):
            Omega0_B = _refine_amplitude_ratio(scn, Omega0, detuning, tail_cache)
    else:
        Om = cfg.float_or_auto("pulses.Omega0_rad_s", positive=True)
        if Om is None:
            raise ConfigError("pulses.Omega0_rad_s: required when optimize.enabled = false")
        Omega0 = Om
        Om_B = cfg.float_or_auto("pulses.Omega0_B_rad_s", positive=True)
        Omega0_B = Om_B if Om_B is not None else Omega0
        detuning = cfg.float_("laser.detuning_rad_s")

    record_modes = cfg.bool_("output.per_mode_columns")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        traj = evaluate_point(scn, Omega0, detuning, tail_cache, Omega0_B=Omega0_B,
                              record_modes=record_modes)
    P = float(abs(traj.final.c001) ** 2)

    converged, delta_P = True, 0.0
    if cfg.bool_("integrate.check_convergence"):
        converged, delta_P, traj, P = _convergence_check(
            cfg, scn, Omega0, detuning, traj, P, Omega0_B)

    R = float("nan")
    if P > 0:
        R = dwell_ratio(traj, scn.geometry.L, scn.kappa_c)
    gamma_c = scn.system.gamma_c
    gamma_f = scn.system.gamma_f
    g_sel = abs(coupling_g(scn.target, scn.system.atom_A, scn.geometry))
    report = RunReport(
        lambda_m=scn.system.lam, l_m=scn.geometry.l,
        L_requested_m=scn.L_requested, L_m=scn.geometry.L, mu_m=scn.geometry.mu,
        t_squared=scn.t_squared, kappa_c_rad_s=scn.kappa_c, L_eff_m=scn.L_eff,
        gamma_c_per_s=gamma_c, gamma_f_per_s=gamma_f,
        F_c=scn.kappa_c / (scn.kappa_c + gamma_c),
        P1=p1_bound(scn.kappa_c, gamma_c, gamma_f, scn.geometry.L),
        T_s=scn.system.pulses.T, tau_s=scn.system.pulses.tau,
        target_mode_k=scn.target.k, target_parity=scn.target.parity,
        target_cavity_fraction=scn.target.cavity_fraction,
        omega_L_rad_s=float(scn.omega_L_center + detuning), detuning_rad_s=float(detuning),
        Omega0_A_rad_s=float(Omega0), Omega0_B_rad_s=float(Omega0_B),
        G_max_rad_s=float(g_sel * Omega0 / (2 * abs(scn.system.atom_A.Delta))),
        n_modes_table=len(scn.table), n_modes_used=traj.n_modes,
        mode_window_rad_s=scn.mode_window,
        converged=converged, convergence_delta_P=delta_P,
        P=P, R=R,
        optimizer_evals=opt_result.evaluations if opt_result else 0,
        wall_time_s=time.time() - t_start)

    if write_outputs and out_dir is not None:
        write_trajectory_csv(os.path.join(out_dir, "trajectory.csv"), traj)
        with open(os.path.join(out_dir, "report.txt"), "w") as f:
            f.write("\n".join(report.lines()) + "\n")
        if opt_result is not None:
            write_optimizer_trace(os.path.join(out_dir, "optimizer_trace.csv"), opt_result)
    return report, traj, opt_result


def _refine_amplitude_ratio(scn, Omega0_A, detuning, tail_cache):
    """Optional second pass: scan the receiver/sender amplitude ratio at the
    shared-amplitude optimum and golden-section the best bracket."""
    def P_of(ratio):
        traj = evaluate_point(scn, Omega0_A, detuning, tail_cache,
                              Omega0_B=ratio * Omega0_A)
        return float(abs(traj.final.c001) ** 2)

    ratios = np.geomspace(0.5, 2.0, 9)
    vals = [P_of(r) for r in ratios]
    i = int(np.argmax(vals))
    lo = ratios[max(i - 1, 0)]
    hi = ratios[min(i + 1, len(ratios) - 1)]
    phi = (np.sqrt(5.0) - 1) / 2
    a, b = np.log(lo), np.log(hi)
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = P_of(np.exp(c)), P_of(np.exp(d))
    for _ in range(20):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = P_of(np.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = P_of(np.exp(d))
    return float(np.exp(0.5 * (a + b)) * Omega0_A)


def _convergence_check(cfg, scn, Omega0, detuning, traj, P, Omega0_B=None):
    """Double the dynamics mode window until P moves by < 1e-4 (two rounds)."""
    converged, delta_P = False, float("inf")
    cur_cfg, cur_traj, cur_P = cfg, traj, P
    cur_scn = scn
    for _ in range(2):
        wide_cfg = cur_cfg.copy()
        wide_cfg.set("modes.window_kappa_c",
                     2 * cur_cfg.float_("modes.window_kappa_c"))
        wide_cfg.set("integrate.check_convergence", "false")
        wide_scn = build_scenario(wide_cfg)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            wide_traj = evaluate_point(wide_scn, Omega0, detuning, {},
                                       Omega0_B=Omega0_B)
        wide_P = float(abs(wide_traj.final.c001) ** 2)
        delta_P = abs(wide_P - cur_P)
        if delta_P < 1e-4:
            converged = True
            break
        cur_cfg, cur_scn, cur_traj, cur_P = wide_cfg, wide_scn, wide_traj, wide_P
    if not converged:
        warnings.warn(
            f"mode-window convergence not reached: |dP| = {delta_P:.2e} after doubling twice",
            stacklevel=2)
        return converged, delta_P, cur_traj, cur_P
    return converged, delta_P, cur_traj, cur_P


def run_sweep(cfg: ScenarioConfig, out_dir: str | None = None):
    """One row per axis point; failures are recorded in-row and do not stop
    the sweep.  Points run concurrently when sweep.workers > 1; output order
    follows the axis regardless."""
    variable = cfg.str_("sweep.variable")
    if not variable:
        raise ConfigError("sweep.variable: sweep axis undefined")
    values = cfg.sweep_values()
    if len(values) == 0:
        raise ConfigError("sweep.values: empty sweep axis")
    workers = cfg.int_("sweep.workers", positive=True)
    from .config import dump_config
    cfg_text = dump_config(cfg)
    args = [(cfg_text, variable, float(v)) for v in values]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, args))
    else:
        rows = [_sweep_point(a) for a in args]

    columns = [variable, "P", "R", "P1", "n_modes", "converged", "error"]
    if out_dir is not None:
        write_csv(os.path.join(out_dir, "sweep.csv"), columns, rows, kind="sweep")
    return columns, rows


def _sweep_point(arg):
    """One sweep evaluation; module-level so worker pools can pickle it."""
    cfg_text, variable, value = arg
    import io
    from .config import ScenarioConfig, _fresh_parser
    parser = _fresh_parser()
    parser.read_string(cfg_text)
    point = ScenarioConfig(parser=parser)
    point.set(variable, repr(value))
    try:
        report, _, _ = run_single(point, write_outputs=False)
        return (value, report.P, report.R, report.P1, report.n_modes_used,
                report.converged, "")
    except Exception as exc:
        return (value, float("nan"), float("nan"), float("nan"), 0, False,
                type(exc).__name__ + ": " + str(exc))


def write_trajectory_csv(path, traj):
    columns = ["t_s", "p_atom_A", "p_field_total", "p_atom_B", "norm"]
    base = [traj.t, traj.p_atom_A, traj.p_field, traj.p_atom_B, traj.norm]
    if traj.p_modes is not None:
        columns += [f"p_mode_{i:03d}" for i in range(traj.p_modes.shape[1])]
        base += [traj.p_modes[:, i] for i in range(traj.p_modes.shape[1])]
    rows = ([float(col[j]) for col in base] for j in range(len(traj.t)))
    write_csv(path, columns, rows, kind="trajectory")


def write_optimizer_trace(path, result: OptimizationResult):
    rows = [(i, float(Om), float(det), float(P))
            for i, (Om, det, P) in enumerate(result.trace)]
    write_csv(path, ["eval", "Omega0_rad_s", "detuning_rad_s", "P"], rows,
              kind="optimizer_trace")


def write_modes_csv(path, table: ModeTable):
    rows = [(m.n_continuous, m.parity, m.k, m.N_c, m.N_f, m.cavity_fraction)
            for m in table]
    write_csv(path, ["n", "parity", "k_per_m", "N_c_m", "N_f_m", "cavity_fraction"],
              rows, kind="modes")
