"""Render the four simulation figures from their pipeline CSVs.

Inputs are the flat CSV files the simulation pipelines emit; rendering is
read-only and deterministic (fixed SVG hash salt, no timestamps in the
output), so a fixed input yields byte-identical images.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

plt.rcParams["svg.hashsalt"] = "figrender"
plt.rcParams["figure.dpi"] = 120


class SchemaError(ValueError):
    """Input CSV does not carry the expected columns."""


@dataclass
class FigureSpec:
    figure_id: int
    inputs: list
    output: str
    L_eff_m: float = 0.625   # vertical guide for the dwell-time figure

    def __post_init__(self):
        if self.figure_id not in (1, 2, 3, 4):
            raise ValueError(f"figure id must be 1..4, got {self.figure_id}")
        if not self.inputs:
            raise ValueError("at least one input CSV required")


def read_csv(path, required):
    """Columns (dict of name -> string list), checking the required names."""
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if not ln.startswith("#")]
    lines = [ln for ln in lines if ln]
    if len(lines) < 2:
        raise SchemaError(f"{path}: empty CSV (no data rows)")
    header = lines[0].split(",")
    for name in required:
        if name not in header:
            raise SchemaError(f"{path}: missing column {name!r}")
    cols = {name: [] for name in header}
    for ln in lines[1:]:
        for name, val in zip(header, ln.split(",")):
            cols[name].append(val)
    return cols


def fnum(col):
    return np.array([float(x) for x in col])


MARKERS = {"even": "+", "odd": "o"}


def _fig1(spec):
    fig, axes = plt.subplots(len(spec.inputs), 1, figsize=(6.4, 3.2 * len(spec.inputs)),
                             sharex=True, squeeze=False)
    for ax, path in zip(axes[:, 0], spec.inputs):
        cols = read_csv(path, ["n", "parity", "cavity_fraction"])
        n = fnum(cols["n"])
        f = fnum(cols["cavity_fraction"])
        parity = np.array(cols["parity"])
        for par in ("even", "odd"):
            m = parity == par
            ax.semilogy(n[m], f[m], MARKERS[par], ms=5, mfc="none",
                        label=f"{par} modes")
        ax.set_ylabel("cavity mode content $2N^c/N$")
        ax.legend(loc="upper right", frameon=False)
        ax.set_title(os.path.basename(path), fontsize=9)
    axes[-1, 0].set_xlabel("mode index n")
    return fig


def _fig2(spec):
    cols = read_csv(spec.inputs[0], ["L_m", "R"])
    L = fnum(cols["L_m"])
    R = fnum(cols["R"])
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.semilogx(L, R, "o-", color="tab:blue")
    ax.axvline(spec.L_eff_m, ls=":", color="gray")
    ax.axhline(1.0, ls="--", color="black", lw=0.8)
    ax.text(spec.L_eff_m, ax.get_ylim()[1] * 0.9, " $L_{eff}$", color="gray")
    ax.set_xlabel("fiber length L (m)")
    ax.set_ylabel("normalized field dwell time R")
    return fig


def _fig3(spec):
    cols = read_csv(spec.inputs[0], ["gamma_c_per_s", "P_cavity_like", "P_neighbor", "P1"])
    g = fnum(cols["gamma_c_per_s"])
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.semilogx(g, np.log10(fnum(cols["P_cavity_like"])), "s-",
                color="tab:blue", label="1: cavity-like mode")
    ax.semilogx(g, np.log10(fnum(cols["P_neighbor"])), "o-",
                color="tab:red", label="2: neighbor, same parity")
    ax.semilogx(g, np.log10(fnum(cols["P1"])), "--", color="black",
                label="$\\log_{10} P_1$")
    ax.set_xlabel("cavity loss rate $\\gamma_c$ (1/s)")
    ax.set_ylabel("$\\log_{10} P$")
    ax.legend(frameon=False)
    return fig


def _fig4(spec):
    cols = read_csv(spec.inputs[0], ["gamma_per_s", "L_m", "P", "P1"])
    g = fnum(cols["gamma_per_s"])
    L = fnum(cols["L_m"])
    P = fnum(cols["P"])
    P1 = fnum(cols["P1"])
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for i, Lv in enumerate(sorted(set(L.tolist()))):
        m = L == Lv
        color = f"C{i}"
        ax.semilogx(g[m], np.log10(P[m]), "o-", color=color, label=f"L = {Lv:g} m")
        ax.semilogx(g[m], np.log10(P1[m]), "--", color=color, lw=1.0)
    ax.set_xlabel("fiber loss rate $\\gamma_f = \\gamma_c$ (1/s)")
    ax.set_ylabel("$\\log_{10} P$")
    ax.legend(frameon=False, title="dashed: $\\log_{10} P_1$")
    return fig


_BUILDERS = {1: _fig1, 2: _fig2, 3: _fig3, 4: _fig4}


def build_figure(spec: FigureSpec):
    """Figure object for the spec (no file written); raises before touching
    the output on any input problem."""
    return _BUILDERS[spec.figure_id](spec)


def render(spec: FigureSpec) -> str:
    """Render to spec.output (SVG/PDF/PNG by extension); deterministic."""
    fig = build_figure(spec)
    out_dir = os.path.dirname(os.path.abspath(spec.output))
    os.makedirs(out_dir, exist_ok=True)
    meta = {}
    if spec.output.endswith(".svg"):
        meta = {"Date": None}
    elif spec.output.endswith(".pdf"):
        meta = {"CreationDate": None}
    fig.savefig(spec.output, metadata=meta)
    plt.close(fig)
    return spec.output
