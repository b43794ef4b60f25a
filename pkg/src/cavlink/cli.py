"""Command-line interface.

Subcommands: modes, run, sweep, figure {1|2|3|4}, optimize.
Exit status: 0 success, 1 configuration/validation error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np
from scipy.constants import c as C_LIGHT

from .config import ConfigError, load_config
from .integrators import IntegrationError
from .modes import ModeSolverError
from .optimize import AllGridPointsFailed
from .figures import run_figure
from .runner import build_scenario, run_single, run_sweep, write_modes_csv


def _add_common(sub):
    sub.add_argument("--config", default=None, help="INI config file")
    sub.add_argument("--out", default="out", help="output directory")
    sub.add_argument("--set", dest="overrides", action="append", default=[],
                     metavar="KEY=VALUE", help="override section.key=value")
    sub.add_argument("--modes-window", type=float, default=None, metavar="RATE",
                     help="dynamics mode window half-width (rad/s)")
    sub.add_argument("--loss-convention", choices=("half", "full"), default=None)


def _load(args):
    cfg = load_config(args.config, args.overrides)
    if args.loss_convention is not None:
        cfg.set("loss.convention", args.loss_convention)
    if args.modes_window is not None:
        lam = cfg.float_("geometry.lambda_m", positive=True)
        l = cfg.float_("geometry.l_m", positive=True)
        k0 = 2 * np.pi / lam
        mu_m = cfg.float_or_auto("geometry.mu_m")
        mu = mu_m if mu_m is not None else cfg.float_("geometry.mu_k0") / k0
        t_sq = 4.0 / (4.0 + (mu * k0) ** 2)
        kappa_c = C_LIGHT * t_sq / (2 * l)
        cfg.set("modes.window_kappa_c", args.modes_window / kappa_c)
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cavlink",
        description="Cavity-fiber-cavity quantum state transfer simulator")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, descr in (
            ("modes", "solve the mode table and write modes.csv"),
            ("run", "single scenario: modes, losses, optional optimization, dynamics"),
            ("sweep", "sweep one configuration variable, write sweep.csv"),
            ("optimize", "force pulse optimization and write optimizer_trace.csv"),
    ):
        sub = subs.add_parser(name, help=descr)
        _add_common(sub)
    fig = subs.add_parser("figure", help="run a figure-reproduction pipeline")
    fig.add_argument("figure_id", type=int, choices=(1, 2, 3, 4))
    _add_common(fig)

    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
        os.makedirs(args.out, exist_ok=True)
        if args.command == "modes":
            scn = build_scenario(cfg)
            write_modes_csv(os.path.join(args.out, "modes.csv"), scn.table)
            print(f"{len(scn.table)} modes -> {args.out}/modes.csv")
        elif args.command in ("run", "optimize"):
            if args.command == "optimize":
                cfg.set("optimize.enabled", "true")
            report, traj, opt = run_single(cfg, out_dir=args.out)
            print("\n".join(report.lines()))
        elif args.command == "sweep":
            columns, rows = run_sweep(cfg, out_dir=args.out)
            print(f"{len(rows)} sweep points -> {args.out}/sweep.csv")
            bad = [r for r in rows if r[-1]]
            if bad:
                print(f"{len(bad)} point(s) failed; see the error column")
        elif args.command == "figure":
            result = run_figure(args.figure_id, cfg, args.out)
            checks = result[-2]
            for passed, claim in checks:
                print(("PASS " if passed else "FAIL ") + claim)
            print(f"outputs -> {args.out}/")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except (IntegrationError, ModeSolverError, AllGridPointsFailed) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
