"""Dissipative preparation of nuclear-spin singlet pairs near an NV center."""

__version__ = "0.1.0"

from .errors import IntegrationError, InvalidInputError, NonUniqueSteadyStateError, NumericalError
from .model import (
    DetuningSchedule,
    DriveParams,
    NoiseParams,
    NuclearSpin,
    PhysicalConstants,
    SpinSystem,
    alpha_coefficient,
    alphas,
    build_full_hamiltonian,
    build_jump_operators,
    build_local_hamiltonian,
    gamma_reset,
    validity_time,
)
from .dynamics import (
    Liouvillian,
    PerturbativeValidityWarning,
    ResetProtocol,
    Trajectory,
    build_liouvillian,
    convergence_time,
    effective_liouvillian,
    simulate_effective,
    simulate_full,
    spectral_gap,
    steady_state,
    zero_mode_count,
)
from .entanglement import (
    amplitude_ln,
    analytic_ln,
    analytic_steady_state,
    log_negativity,
    noise_parameter,
    optimal_detuning_ratio,
    pair_populations,
    trace_distance,
)
from .geometry import LatticeSpec, dimer_abundance, dipolar_coupling, hyperfine_from_position
from .config import Experiment, bundled_config, load_config, parse_experiment

__all__ = [
    "IntegrationError",
    "InvalidInputError",
    "NonUniqueSteadyStateError",
    "NumericalError",
    "DetuningSchedule",
    "DriveParams",
    "NoiseParams",
    "NuclearSpin",
    "PhysicalConstants",
    "SpinSystem",
    "alpha_coefficient",
    "alphas",
    "build_full_hamiltonian",
    "build_jump_operators",
    "build_local_hamiltonian",
    "gamma_reset",
    "validity_time",
    "Liouvillian",
    "PerturbativeValidityWarning",
    "ResetProtocol",
    "Trajectory",
    "build_liouvillian",
    "convergence_time",
    "effective_liouvillian",
    "simulate_effective",
    "simulate_full",
    "spectral_gap",
    "steady_state",
    "zero_mode_count",
    "amplitude_ln",
    "analytic_ln",
    "analytic_steady_state",
    "log_negativity",
    "noise_parameter",
    "optimal_detuning_ratio",
    "pair_populations",
    "trace_distance",
    "LatticeSpec",
    "dimer_abundance",
    "dipolar_coupling",
    "hyperfine_from_position",
    "Experiment",
    "bundled_config",
    "load_config",
    "parse_experiment",
]
