"""Superadiabatic population transfer in a three-level transmon ladder.

Simulation library and CLI for STIRAP and its superadiabatic variant
driven by a two-photon counterdiabatic tone, including the ac-Stark
phase corrections, the fractional NOT gate, and fluctuation averages.
"""

from .evolve import (
    IntegrationFailure,
    IntegratorConfig,
    Trajectory,
    averaged_population,
    integrate,
    propagator_oracle,
)
from .jobio import (
    CODE_VERSION,
    ConfigError,
    JobConfig,
    ResultError,
    SweepResult,
    config_hash,
    load_config,
    write_result,
)
from .model import (
    DriveDetunings,
    QutritParams,
    basis_state,
    build_carrier_hamiltonian,
    build_effective_hamiltonian,
    build_rwa_hamiltonian,
    instantaneous_eigensystem,
    populations,
)
from .protocols import (
    GateMatrix,
    ProtocolConfig,
    ProtocolError,
    ReconstructionError,
    TransferResult,
    build_schedule,
    cd_magnitude,
    drive_hamiltonian,
    gate_initial_state,
    ideal_not_gate,
    not_gate_runner,
    optimal_cd_amplitude,
    optimal_constant_phase,
    pi_pulse_area_scale,
    pi_pulse_gate,
    pi_pulse_runner,
    reconstruct_gate_matrix,
    run_detuned_sastirap,
    run_not_gate,
    run_pi_pulse_batch,
    run_protocol_batch,
    run_sastirap,
    run_stirap,
    state_fidelity,
)
from .pulses import (
    FractionalParams,
    GaussianPulse,
    PulseError,
    PulseSchedule,
    cd_envelope,
    drive_floor_mask,
    fractional_schedule,
    global_adiabaticity,
    mixing_angle,
    pulse_area,
    stirap_schedule,
    two_photon_cd_envelope,
)
from .robustness import (
    AveragedFidelity,
    FluctuationSampleError,
    FluctuationSpec,
    averaged_fidelity,
    default_x_grid,
    fidelity_landscape,
)
from .stark import (
    DynamicalPhases,
    LevelShifts,
    StarkPoleError,
    WeakEliminationWarning,
    dynamical_phases,
    effective_coupling,
    level_shifts,
    shift_coefficients,
)
from .sweeps import run_command

__version__ = CODE_VERSION
