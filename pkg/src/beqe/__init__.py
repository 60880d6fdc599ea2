"""Bath-engineered quantum Otto engines on transverse-field Ising chains."""

from .config import ConfigError, RunManifest, Series, parse_config, preset
from .cycle import (CycleConfig, CycleResult, adiabatic_closed_form, is_engine_mode, run_cycle,
                    sweep_tau)
from .dynamics import (BathSpec, IntegrationError, RampProtocol, dissipative_stroke, evolve_sta,
                       evolve_unitary, thermal_state, validate_state)
from .ltim import LevelPopulations, evolve_dense, gap_filtered_thermalize, run_ltim_cycle
from .tim import CriticalExponents, CutoffPolicy, kz_cutoff, kz_freezeout_time, mode_gap, mode_grid

__version__ = "0.1.0"
