"""Scenario configuration: INI file with sections, SI units in key names.

All defaults are the operating point used throughout the analysis
(lambda = 852 nm, mu*k0 = 500, l = 1e-5 m, g_max/2pi = 100 MHz,
Delta/2pi = 500 MHz, T = 20/kappa_c, tau = 1.2 T).  Overrides come from a
config file and/or repeated --set section.key=value flags.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

import numpy as np

DEFAULTS = """
[geometry]
lambda_m = 852e-9
l_m = 1e-5
L_m = 0.01
mu_k0 = 500.0
mu_m = auto
alignment = comb_aligned

[atoms]
g_max_rad_s = 6.283185307179586e8
Delta_rad_s = 3.141592653589793e9
s_A_m = auto
s_B_m = auto

[pulses]
T_kappa_c = 20.0
T_s = auto
tau_over_T = 1.2
Omega0_rad_s = auto
Omega0_B_rad_s = auto
phase_compensation = true

[laser]
target_mode = most_cavity_like
detuning_rad_s = 0.0

[loss]
gamma_c_per_s = 0.0
gamma_f_per_s = 0.0
convention = half

[modes]
window_kappa_c = 200.0
table_margin_fsr = 3.5
scan_per_fsr = 8
index_reference = auto

[integrate]
rtol = 1e-9
atol = 1e-12
backend = auto
check_convergence = true

[optimize]
enabled = true
grid = 9
max_evals = 400
omega_lo_rad_s = auto
omega_hi_rad_s = auto
detuning_span_fsr = 3.0
detuning_span_rad_s = auto
omega_cap_Delta = 4.0
P_tolerance = 1e-4
independent_amplitudes = false

[sweep]
variable =
values =
lo =
hi =
points =
spacing = log
workers = 1

[output]
dir = out
trajectory_csv = true
per_mode_columns = false
"""


class ConfigError(ValueError):
    """Validation failure; message names the offending section.key."""


@dataclass
class ScenarioConfig:
    """Typed view over the parsed INI tree."""

    parser: configparser.ConfigParser = field(repr=False)

    # -- typed getters -------------------------------------------------
    def _raw(self, key: str) -> str:
        section, _, name = key.partition(".")
        try:
            return self.parser.get(section, name)
        except (configparser.NoSectionError, configparser.NoOptionError):
            raise ConfigError(f"{key}: unknown configuration key")

    def str_(self, key: str) -> str:
        return self._raw(key).strip()

    def float_(self, key: str, positive=False, nonnegative=False) -> float:
        raw = self.str_(key)
        try:
            val = float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}")
        if positive and not val > 0:
            raise ConfigError(f"{key}: must be > 0, got {val}")
        if nonnegative and val < 0:
            raise ConfigError(f"{key}: must be >= 0, got {val}")
        return val

    def float_or_auto(self, key: str, **kw):
        raw = self.str_(key)
        if raw == "auto" or raw == "":
            return None
        return self.float_(key, **kw)

    def int_(self, key: str, positive=False) -> int:
        raw = self.str_(key)
        try:
            val = int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}")
        if positive and not val > 0:
            raise ConfigError(f"{key}: must be > 0, got {val}")
        return val

    def bool_(self, key: str) -> bool:
        raw = self.str_(key).lower()
        if raw in ("true", "yes", "on", "1"):
            return True
        if raw in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")

    def choice(self, key: str, choices) -> str:
        raw = self.str_(key)
        if raw not in choices:
            raise ConfigError(f"{key}: must be one of {sorted(choices)}, got {raw!r}")
        return raw

    def float_list(self, key: str) -> list:
        raw = self.str_(key)
        if not raw:
            return []
        try:
            return [float(x) for x in raw.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"{key}: expected a list of numbers, got {raw!r}")

    def set(self, key: str, value) -> None:
        section, _, name = key.partition(".")
        if not self.parser.has_section(section):
            raise ConfigError(f"{key}: unknown configuration section")
        if not self.parser.has_option(section, name):
            raise ConfigError(f"{key}: unknown configuration key")
        self.parser.set(section, name, str(value))

    def copy(self) -> "ScenarioConfig":
        clone = _fresh_parser()
        for section in self.parser.sections():
            for name, value in self.parser.items(section):
                clone.set(section, name, value)
        return ScenarioConfig(parser=clone)

    # -- semantic accessors --------------------------------------------
    def target_mode_selector(self):
        raw = self.str_("laser.target_mode")
        if raw in ("most_cavity_like", "neighbor_same_parity"):
            return raw
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(
                "laser.target_mode: must be most_cavity_like, neighbor_same_parity "
                f"or an integer index, got {raw!r}")

    def sweep_values(self) -> np.ndarray:
        values = self.float_list("sweep.values")
        if values:
            return np.asarray(values, dtype=float)
        lo = self.float_or_auto("sweep.lo")
        hi = self.float_or_auto("sweep.hi")
        pts = self.str_("sweep.points")
        if lo is None or hi is None or not pts:
            raise ConfigError("sweep.values or sweep.lo/hi/points: sweep axis undefined")
        n = self.int_("sweep.points", positive=True)
        if not (lo < hi):
            raise ConfigError(f"sweep.lo/hi: need lo < hi, got ({lo}, {hi})")
        spacing = self.choice("sweep.spacing", {"log", "linear"})
        if spacing == "log":
            if lo <= 0:
                raise ConfigError("sweep.lo: log spacing needs lo > 0")
            return np.geomspace(lo, hi, n)
        return np.linspace(lo, hi, n)

    def validate_physical(self) -> None:
        self.float_("geometry.lambda_m", positive=True)
        self.float_("geometry.l_m", positive=True)
        self.float_("geometry.L_m", positive=True)
        mu_m = self.float_or_auto("geometry.mu_m", nonnegative=True)
        if mu_m is None:
            self.float_("geometry.mu_k0", positive=True)
        self.choice("geometry.alignment", {"comb_aligned", "pair_split", "exact"})
        self.float_("atoms.g_max_rad_s", positive=True)
        self.float_("atoms.Delta_rad_s")
        self.float_("pulses.tau_over_T")
        self.float_("loss.gamma_c_per_s", nonnegative=True)
        self.float_("loss.gamma_f_per_s", nonnegative=True)
        self.choice("loss.convention", {"half", "full"})
        self.choice("integrate.backend", {"auto", "rk", "expm"})
        self.float_("integrate.rtol", positive=True)
        self.float_("integrate.atol", positive=True)
        self.float_("modes.window_kappa_c", positive=True)
        self.float_("modes.table_margin_fsr", positive=True)
        self.int_("optimize.grid", positive=True)
        self.int_("optimize.max_evals", positive=True)
        if self.str_("pulses.T_s") == "auto":
            self.float_("pulses.T_kappa_c", positive=True)
        else:
            self.float_("pulses.T_s", positive=True)


def _fresh_parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str    # keys are case-sensitive (L_m vs l_m)
    parser.read_string(DEFAULTS)
    return parser


def load_config(path: str | None = None, overrides: list | None = None) -> ScenarioConfig:
    """Defaults, optionally merged with an INI file and --set overrides."""
    parser = _fresh_parser()
    if path is not None:
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
    cfg = ScenarioConfig(parser=parser)
    for item in overrides or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set {item!r}: expected section.key=value")
        cfg.set(key.strip(), value.strip())
    cfg.validate_physical()
    return cfg


def dump_config(cfg: ScenarioConfig) -> str:
    buf = io.StringIO()
    cfg.parser.write(buf)
    return buf.getvalue()
