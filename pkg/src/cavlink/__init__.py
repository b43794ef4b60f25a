"""cavlink: quantum state transfer between atoms in fiber-linked cavities.

Exact 1D mode spectra of the cavity-fiber-cavity system, lossy
single-excitation amplitude dynamics, pulse optimization, and the
figure-reproduction pipelines.
"""
from .mirrors import MirrorModel, CompositeScattering, mirror_t, mirror_r, composite_TR
from .modes import Geometry, Mode, ModeTable, find_modes, mode_function, norm_factors
from .coupling import (AtomParams, PulseSchedule, SystemParams, coupling_g,
                       effective_G, stark_shift, pulse_value, mode_detuning)
from .losses import LossParams, LossMatrix, build_loss
from .dynamics import (AmplitudeState, Trajectory, integrate, transfer_probability,
                       dwell_ratio, p1_bound)
from .optimize import (OptimizationProblem, OptimizationResult, optimize_transfer,
                       resolve_mode_selector)
from .config import ScenarioConfig, ConfigError, load_config
from .runner import RunReport, build_scenario, run_single, run_sweep

__version__ = "0.1.0"
