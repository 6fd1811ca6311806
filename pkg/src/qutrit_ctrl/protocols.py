"""Transfer protocols and gates built from the drive primitives.

This module assembles complete experiments: it turns a handful of protocol
parameters into time-dependent Hamiltonians, propagates them, and reports
populations, overlaps, and gate matrices.

Composition of the drives
-------------------------
A protocol run always starts from a two-Gaussian STIRAP schedule (optionally
folded into a fractional double sequence). On top of the bare envelopes it
can add, controlled by ``cd_mode``:

``"off"``
    Plain STIRAP. Works only adiabatically.
``"ideal"``
    The counterdiabatic coupling is inserted directly as a 0-2 matrix
    element ``i dTheta/dt`` (plus the 0-1/1-2 quadrature terms at nonzero
    single-photon detuning). No physical tone exists, so there are no
    ac-Stark shifts; this is the mathematical reference the physical drive
    tries to emulate.
``"two_photon"``
    The 0-2 coupling is realized by a physical two-photon tone at half the
    0-2 transition frequency. Its magnitude is chosen so the second-order
    effective coupling reproduces the counterdiabatic envelope, and its
    static phase is (arg Omega_cd - pi)/2. The price is a set of ac-Stark
    shifts on all three levels, quadratic in the drive amplitude.

The Stark shifts detune the protocol and spoil the transfer unless they are
compensated, which is what ``corrections`` selects:

``"none"``
    Static phase only; the shifts act unhindered.
``"constant"``
    A single constant 0-2 drive phase, calibrated (or supplied) to maximize
    the final target population. This is the best a phase-only calibration
    can do and is the baseline the dynamical correction is judged against.
``"dynamical"``
    Every drive phase is modulated with the running integral of its
    transition's Stark shift, phi_ij(t) = int eps_ij dtau (the 0-2 drive
    receives half of phi_02, which the two-photon process doubles back).
    In the frame of the drives this cancels the shifts exactly at second
    order.

All counterdiabatic terms are built per schedule segment — each half of a
fractional sequence is its own adiabatic process with its own mixing angles.
The combined drive ratio swings through a relabeling of the adiabatic basis
between the halves while the drives are off; a counterdiabatic pulse derived
from the combined envelopes would turn that relabeling into a physical
rotation and wreck the gate. Within each segment the terms are additionally
gated by a smooth drive-floor mask that turns them off where the segment's
drive falls below a small fraction of its peak: those stretches carry no
population, and following the angle there would demand pulses far outside
the perturbative regime.

Backends
--------
``"effective"`` propagates the rotating-frame Hamiltonian with the
two-photon tone folded into its second-order effects (effective 0-2
coupling plus Stark shifts) — cheap and quantitatively accurate when the
tone is weak against its detuning. ``"carrier"`` keeps the residual
carriers: each tone enters with its full time dependence exp(-i delta_chan
t), the 0-2 tone drives both ladder channels, and the Stark physics emerges
dynamically instead of being put in by hand. The carrier backend is the
arbiter when the effective picture is in doubt.

Batching
--------
Every generator accepts per-member arrays of single-photon detunings, STIRAP
amplitude scales, two-photon amplitude scales, and phase offsets, and builds
a stacked (..., 3, 3) Hamiltonian. Sweeps and fluctuation averages propagate
thousands of members in one integrator call, in lockstep, sharing the
envelope evaluations that do not depend on the member.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .evolve import IntegratorConfig, Trajectory, integrate
from .model import QutritParams, basis_state
from .pulses import (
    FractionalParams,
    PulseSchedule,
    drive_floor_mask,
    fractional_schedule,
    mixing_angle,
    stirap_schedule,
)
from .stark import (
    ELIMINATION_RATIO,
    WeakEliminationWarning,
    dynamical_phases,
    shift_coefficients,
)

__all__ = [
    "ProtocolError",
    "ReconstructionError",
    "ProtocolConfig",
    "TransferResult",
    "GateMatrix",
    "build_schedule",
    "run_protocol_batch",
    "run_stirap",
    "run_sastirap",
    "run_detuned_sastirap",
    "run_not_gate",
    "run_pi_pulse_batch",
    "pi_pulse_gate",
    "pi_pulse_area_scale",
    "cd_magnitude",
    "optimal_cd_amplitude",
    "optimal_constant_phase",
    "ideal_not_gate",
    "gate_initial_state",
    "state_fidelity",
    "not_gate_runner",
    "pi_pulse_runner",
    "reconstruct_gate_matrix",
]

CD_MODES = ("off", "ideal", "two_photon")
CORRECTION_MODES = ("none", "constant", "dynamical")
BACKENDS = ("effective", "carrier")


class ProtocolError(ValueError):
    """A protocol configuration is inconsistent with the requested run."""


class ReconstructionError(RuntimeError):
    """Gate reconstruction aborted because too much population leaked."""


@dataclass(frozen=True)
class ProtocolConfig:
    """Complete description of one transfer or gate experiment.

    Amplitudes and times are in anharmonicity units (Delta = 1 for the
    default qutrit). ``delta`` is the single-photon detuning, applied as
    delta01 = -delta12 = delta so the two-photon resonance condition holds;
    ``delta02`` is the two-photon tone's offset from the 0-1 transition and
    defaults to Delta/2 (exact two-photon resonance with 0-2).

    ``constant_phase`` is the absolute 0-2 drive phase used when
    ``corrections == "constant"``; leave it ``None`` to have the runners
    calibrate it by maximizing the final target population.
    """

    qutrit: QutritParams = QutritParams()
    omega01_peak: float = 1.0 / 6.0
    omega12_peak: float = 1.0 / 6.0
    sigma: float = 36.0
    t_s: float = -72.0
    delta: float = 0.0
    delta02: float | None = None
    cd_mode: str = "off"
    corrections: str = "none"
    backend: str = "effective"
    frac: FractionalParams | None = None
    window_pad: float = 5.0
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    samples_per_sigma: float = 50.0
    cd_floor: float = 1e-3
    constant_phase: float | None = None

    def __post_init__(self) -> None:
        if self.cd_mode not in CD_MODES:
            raise ProtocolError(f"cd_mode must be one of {CD_MODES}, got {self.cd_mode!r}")
        if self.corrections not in CORRECTION_MODES:
            raise ProtocolError(
                f"corrections must be one of {CORRECTION_MODES}, got {self.corrections!r}"
            )
        if self.backend not in BACKENDS:
            raise ProtocolError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.omega01_peak <= 0 or self.omega12_peak <= 0:
            raise ProtocolError("STIRAP peak amplitudes must be positive")
        if self.sigma <= 0:
            raise ProtocolError(f"sigma must be positive, got {self.sigma}")
        if self.corrections != "none" and self.cd_mode != "two_photon":
            raise ProtocolError(
                "phase corrections compensate ac-Stark shifts of the physical "
                "two-photon tone; they require cd_mode='two_photon', got "
                f"cd_mode={self.cd_mode!r}"
            )
        if self.constant_phase is not None and self.corrections != "constant":
            raise ProtocolError(
                "constant_phase is only meaningful with corrections='constant'"
            )
        if self.delta02 is not None and self.delta02 <= 0:
            raise ProtocolError(f"delta02 must be positive, got {self.delta02}")
        if not 0 < self.cd_floor < 1:
            raise ProtocolError(f"cd_floor must lie in (0, 1), got {self.cd_floor}")
        if self.samples_per_sigma <= 0:
            raise ProtocolError("samples_per_sigma must be positive")

    @property
    def big_delta(self) -> float:
        return self.qutrit.anharmonicity

    @property
    def delta02_value(self) -> float:
        return self.delta02 if self.delta02 is not None else 0.5 * self.big_delta


def build_schedule(cfg: ProtocolConfig) -> PulseSchedule:
    """The pulse schedule a configuration describes (fractional if requested)."""
    base = stirap_schedule(
        cfg.omega01_peak, cfg.omega12_peak, cfg.sigma, cfg.t_s, cfg.window_pad
    )
    if cfg.frac is not None:
        return fractional_schedule(base, cfg.frac)
    return base


def _as_member_array(value, name: str):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ProtocolError(f"{name} must be finite, got {value!r}")
    return arr


class _DriveGenerator:
    """Precomputed time-dependent Hamiltonian for a (possibly batched) run.

    Member arrays (single-photon detunings, STIRAP amplitude scales,
    two-photon amplitude scales, phase offsets, constant phases) share a
    common broadcast shape B; ``hamiltonian(t)`` returns shape B + (3, 3).
    Counterdiabatic ingredients are assembled segment by segment from the
    schedule's sub-sequences; the drive-floor mask is computed from the
    unscaled segment envelopes, which is exact as long as both STIRAP
    amplitudes carry the same member scale.
    """

    def __init__(
        self,
        cfg: ProtocolConfig,
        schedule: PulseSchedule,
        *,
        deltas=0.0,
        stirap_scales=1.0,
        cd_scales=1.0,
        phase_offsets=0.0,
        constant_phases=None,
    ) -> None:
        self.cfg = cfg
        self.schedule = schedule
        self.env01 = schedule.env01
        self.env12 = schedule.env12
        self.lam = cfg.qutrit.lam
        self.big_delta = cfg.big_delta
        self.delta02 = cfg.delta02_value
        # Residual rotation of the effective 0-2 element in the STIRAP frame;
        # vanishes at the default delta02 = Delta/2.
        self.residual = 2.0 * self.delta02 - self.big_delta

        deltas = _as_member_array(deltas, "deltas")
        stirap_scales = _as_member_array(stirap_scales, "stirap_scales")
        cd_scales = _as_member_array(cd_scales, "cd_scales")
        phase_offsets = _as_member_array(phase_offsets, "phase_offsets")
        if np.any(stirap_scales < 0) or np.any(cd_scales < 0):
            raise ProtocolError("amplitude scales must be nonnegative")
        if cfg.corrections == "constant":
            if constant_phases is None:
                raise ProtocolError(
                    "corrections='constant' needs a constant phase; calibrate "
                    "with optimal_constant_phase or set cfg.constant_phase"
                )
            constant_phases = _as_member_array(constant_phases, "constant_phases")
        else:
            constant_phases = np.asarray(0.0)

        shape = np.broadcast_shapes(
            deltas.shape,
            stirap_scales.shape,
            cd_scales.shape,
            phase_offsets.shape,
            constant_phases.shape,
        )
        self.batch_shape = shape
        self.deltas = np.broadcast_to(deltas, shape)
        self.k = np.broadcast_to(stirap_scales, shape)
        self.s = np.broadcast_to(cd_scales, shape)
        self.s2 = self.s * self.s
        self.w = np.broadcast_to(phase_offsets, shape)
        self.const_phase = np.broadcast_to(constant_phases, shape)

        # Counterdiabatic terms come from the per-segment envelopes; the floor
        # mask references each segment's own unscaled drive peak
        # (scale-invariant gating).
        t0, t1 = schedule.window
        grid = np.linspace(t0, t1, 8193)
        self.segments = []
        for s01, s12 in schedule.cd_segments:
            peak = float(np.max(np.hypot(s01.value(grid), s12.value(grid))))
            self.segments.append((s01, s12, peak))

        self.phases = None
        self.mag_peak = 0.0
        if cfg.cd_mode == "two_photon":
            (self.c0, self.c1, self.c2, self.c01, self.c12, self.c02) = (
                shift_coefficients(self.delta02, self.big_delta, self.lam)
            )
            self.mag_peak = float(np.max(self.magnitude02(grid)))
            top = float(np.max(self.s)) * self.mag_peak if self.s.size else 0.0
            if top > 0.0 and self.delta02 / top < ELIMINATION_RATIO:
                warnings.warn(
                    "adiabatic elimination marginal for this two-photon drive: "
                    f"delta02/|Omega02|_peak = {self.delta02 / top:.2f} < "
                    f"{ELIMINATION_RATIO}",
                    WeakEliminationWarning,
                    stacklevel=3,
                )
            if cfg.corrections == "dynamical":
                self.phases = dynamical_phases(
                    self.magnitude02,
                    self.delta02,
                    self.big_delta,
                    self.lam,
                    schedule.window,
                )
        else:
            self.c0 = self.c1 = self.c2 = 0.0
            self.c01 = self.c12 = self.c02 = 0.0

        self._h = np.zeros(shape + (3, 3), dtype=complex)
        if cfg.backend == "carrier":
            rates = [abs(self.delta02), abs(self.delta02 - self.big_delta)]
            rates.append(float(np.max(np.abs(self.deltas))) if self.deltas.size else 0.0)
            top_rate = max(rates)
            self.max_step = 0.5 / top_rate if top_rate > 0 else math.inf
        else:
            self.max_step = math.inf

    # -- shared time-dependent pieces -------------------------------------

    def _raw(self, t):
        """Drive envelopes and per-segment counterdiabatic ingredients at time t.

        ``theta_cd`` is the mask-gated sum of the segment mixing-angle rates
        (the counterdiabatic 0-2 envelope is 2 theta_cd); ``segs`` carries the
        per-segment quantities the quadrature terms need.
        """
        e01 = self.env01.value(t)
        e12 = self.env12.value(t)
        theta_cd = 0.0
        segs = []
        for s01_env, s12_env, peak in self.segments:
            s01 = s01_env.value(t)
            s12 = s12_env.value(t)
            d01 = s01_env.derivative(t)
            d12 = s12_env.derivative(t)
            r2 = s01 * s01 + s12 * s12
            if r2 > 0.0:
                r = math.sqrt(r2)
                theta_dot = (d01 * s12 - s01 * d12) / r2
                r_dot = (s01 * d01 + s12 * d12) / r
            else:
                r = theta_dot = r_dot = 0.0
            mask = float(drive_floor_mask(r, peak, self.cfg.cd_floor))
            theta_cd += theta_dot * mask
            if r2 > 0.0:
                segs.append((r2, r_dot, s01 / r, s12 / r, mask))
        return e01, e12, theta_cd, segs

    def magnitude02(self, t):
        """Unscaled two-photon drive magnitude realizing the masked CD pulse."""
        t = np.asarray(t, dtype=float)
        theta_cd = np.zeros(t.shape)
        for s01_env, s12_env, peak in self.segments:
            s01 = np.asarray(s01_env.value(t), dtype=float)
            s12 = np.asarray(s12_env.value(t), dtype=float)
            d01 = np.asarray(s01_env.derivative(t), dtype=float)
            d12 = np.asarray(s12_env.derivative(t), dtype=float)
            r2 = s01 * s01 + s12 * s12
            safe = np.where(r2 > 0.0, r2, 1.0)
            theta_dot = np.where(r2 > 0.0, (d01 * s12 - s01 * d12) / safe, 0.0)
            mask = drive_floor_mask(np.sqrt(r2), peak, self.cfg.cd_floor)
            theta_cd = theta_cd + theta_dot * mask
        return np.sqrt(4.0 * self.delta02 * np.abs(theta_cd) / self.lam)

    def _stirap_phases(self, t):
        """Dynamical correction phases of the 0-1 and 1-2 drives (per member)."""
        if self.phases is None:
            zero = np.zeros(self.batch_shape)
            return zero, zero, 0.0
        q = float(self.phases.quad_value(t))
        return self.c01 * q * self.s2, self.c12 * q * self.s2, q

    def _phase02(self, t, theta_cd, q):
        """Total 0-2 drive phase per member (static + corrections + offset)."""
        flip = 0.5 * math.pi if theta_cd < 0.0 else 0.0
        if self.cfg.corrections == "constant":
            base = self.const_phase
        elif self.cfg.corrections == "dynamical":
            base = -0.25 * math.pi + 0.5 * self.c02 * q * self.s2
        else:
            base = -0.25 * math.pi
        return flip + base + self.w

    # -- backends ----------------------------------------------------------

    def hamiltonian(self, t: float) -> np.ndarray:
        if self.cfg.backend == "carrier":
            return self._carrier(t)
        return self._effective(t)

    def _quadratures(self, segs):
        """Detuned counterdiabatic quadrature amplitudes (2i a01, 2i a12).

        Each segment contributes dPhi/dt terms built from its own drive
        magnitude and mixing angle; segments are summed (they do not overlap
        in time beyond envelope tails).
        """
        a01 = 0.0
        a12 = 0.0
        for r2, r_dot, sin_t, cos_t, mask in segs:
            denom = 2.0 * (self.k * self.k * r2 + self.deltas * self.deltas)
            num = self.deltas * self.k * r_dot
            phi_dot = np.where(
                denom > 0.0, num / np.where(denom > 0.0, denom, 1.0), 0.0
            )
            a01 = a01 + phi_dot * sin_t * mask
            a12 = a12 - phi_dot * cos_t * mask
        return 2.0j * a01, 2.0j * a12

    def _effective(self, t: float) -> np.ndarray:
        cfg = self.cfg
        e01, e12, theta_cd, segs = self._raw(t)
        h = self._h
        h[...] = 0.0

        amp01 = self.k * e01 + 0.0j
        amp12 = self.k * e12 + 0.0j
        if cfg.cd_mode != "off":
            q01, q12 = self._quadratures(segs)
            amp01 = amp01 + q01
            amp12 = amp12 + q12

        if cfg.cd_mode == "two_photon":
            p01, p12, q = self._stirap_phases(t)
            if self.phases is not None:
                amp01 = amp01 * np.exp(1j * p01)
                amp12 = amp12 * np.exp(1j * p12)
            phi02 = self._phase02(t, theta_cd, q)
            m2 = self.s2 * (4.0 * self.delta02 * abs(theta_cd) / self.lam)
            omega_eff = (
                -self.lam * m2 / (2.0 * self.delta02) * np.exp(2j * phi02)
            )
            if self.residual != 0.0:
                omega_eff = omega_eff * np.exp(-1j * self.residual * t)
            h[..., 0, 0] = self.c0 * m2
            h[..., 1, 1] = self.c1 * m2 + self.deltas
            h[..., 2, 2] = self.c2 * m2
            h[..., 0, 2] = 0.5 * omega_eff
        elif cfg.cd_mode == "ideal":
            h[..., 1, 1] = self.deltas
            h[..., 0, 2] = 1j * theta_cd * self.s2 * np.exp(2j * self.w)
        else:
            h[..., 1, 1] = self.deltas

        h[..., 0, 1] = 0.5 * amp01
        h[..., 1, 2] = 0.5 * amp12
        h[..., 1, 0] = np.conj(h[..., 0, 1])
        h[..., 2, 1] = np.conj(h[..., 1, 2])
        h[..., 2, 0] = np.conj(h[..., 0, 2])
        return h

    def _carrier(self, t: float) -> np.ndarray:
        cfg = self.cfg
        e01, e12, theta_cd, segs = self._raw(t)
        h = self._h
        h[...] = 0.0

        amp01 = self.k * e01 + 0.0j
        amp12 = self.k * e12 + 0.0j
        if cfg.cd_mode != "off":
            q01, q12 = self._quadratures(segs)
            amp01 = amp01 + q01
            amp12 = amp12 + q12

        h01 = np.zeros(self.batch_shape, dtype=complex)
        h12 = np.zeros(self.batch_shape, dtype=complex)
        if cfg.cd_mode == "two_photon":
            p01, p12, q = self._stirap_phases(t)
            if self.phases is not None:
                amp01 = amp01 * np.exp(1j * p01)
                amp12 = amp12 * np.exp(1j * p12)
            phi02 = self._phase02(t, theta_cd, q)
            mag = self.s * math.sqrt(4.0 * self.delta02 * abs(theta_cd) / self.lam)
            amp02 = mag * np.exp(1j * phi02)
            h01 = h01 + 0.5 * amp02 * np.exp(-1j * self.delta02 * t)
            h12 = h12 + 0.5 * self.lam * amp02 * np.exp(
                -1j * (self.delta02 - self.big_delta) * t
            )
        elif cfg.cd_mode == "ideal":
            # Valid because delta01 + delta12 = 0: the 0-2 element transforms
            # identically between the carrier and doubly-rotating frames.
            h[..., 0, 2] = 1j * theta_cd * self.s2 * np.exp(2j * self.w)

        h01 = h01 + 0.5 * amp01 * np.exp(-1j * self.deltas * t)
        h12 = h12 + 0.5 * amp12 * np.exp(1j * self.deltas * t)
        h[..., 0, 1] = h01
        h[..., 1, 2] = h12
        h[..., 1, 0] = np.conj(h01)
        h[..., 2, 1] = np.conj(h12)
        h[..., 2, 0] = np.conj(h[..., 0, 2])
        return h


@dataclass(frozen=True)
class TransferResult:
    """Outcome of one protocol run: the trajectory plus its ingredients."""

    config: ProtocolConfig
    schedule: PulseSchedule
    trajectory: Trajectory

    @property
    def window(self) -> tuple[float, float]:
        return self.schedule.window

    @property
    def final_state(self) -> np.ndarray:
        return self.trajectory.final_state

    @property
    def final_populations(self) -> np.ndarray:
        return self.trajectory.final_populations()

    def dark_overlap(self) -> float:
        """Smallest |<D(t)|psi(t)>| over the stored samples (and members).

        The dark state cos(Theta)|0> - sin(Theta)|2> follows the drive
        ratio only; a transitionless protocol keeps the overlap at 1 up to
        the window-edge envelope residuals.
        """
        states = self.trajectory.states
        if states is None:
            raise ValueError("run was made without state storage")
        theta = np.asarray(mixing_angle(self.schedule, self.trajectory.times))
        shape = (theta.size,) + (1,) * (states.ndim - 2)
        cos_t = np.cos(theta).reshape(shape)
        sin_t = np.sin(theta).reshape(shape)
        overlap = np.abs(cos_t * states[..., 0] - sin_t * states[..., 2])
        return float(np.min(overlap))


def _integrator_config(
    cfg: ProtocolConfig,
    generator: _DriveGenerator,
    *,
    store_states: bool,
    sample_stride: float | None,
) -> IntegratorConfig:
    if sample_stride is None and store_states:
        sample_stride = cfg.sigma / cfg.samples_per_sigma
    return IntegratorConfig(
        rel_tol=cfg.rel_tol,
        abs_tol=cfg.abs_tol,
        max_step=generator.max_step,
        sample_stride=sample_stride,
        store_states=store_states,
    )


def run_protocol_batch(
    cfg: ProtocolConfig,
    initial_state,
    *,
    deltas=None,
    stirap_scales=1.0,
    cd_scales=1.0,
    phase_offsets=0.0,
    constant_phases=None,
    store_states: bool = False,
    sample_stride: float | None = None,
    observer: Callable | None = None,
) -> Trajectory:
    """Propagate a batch of protocol variants in one integrator call.

    Member arrays broadcast to a common batch shape B; ``initial_state`` may
    be a single ket (3,) shared by all members or a stacked B + (3,) array.
    ``deltas`` defaults to the configuration's single-photon detuning.
    Returns the raw trajectory (states shaped B + (3,) per sample).
    """
    schedule = build_schedule(cfg)
    if deltas is None:
        deltas = cfg.delta
    if constant_phases is None and cfg.corrections == "constant":
        constant_phases = cfg.constant_phase
    gen = _DriveGenerator(
        cfg,
        schedule,
        deltas=deltas,
        stirap_scales=stirap_scales,
        cd_scales=cd_scales,
        phase_offsets=phase_offsets,
        constant_phases=constant_phases,
    )
    psi = np.asarray(initial_state, dtype=complex)
    if psi.shape[-1:] != (3,):
        raise ProtocolError(f"initial state must end in 3 components, got {psi.shape}")
    # States may carry their own leading axes (e.g. an initial-state family)
    # that broadcast against the member parameters.
    full = np.broadcast_shapes(gen.batch_shape, psi.shape[:-1])
    if psi.shape != full + (3,):
        psi = np.broadcast_to(psi, full + (3,))
    icfg = _integrator_config(
        cfg, gen, store_states=store_states, sample_stride=sample_stride
    )
    return integrate(gen.hamiltonian, psi, schedule.window, icfg, observer=observer)


def _run_single(
    cfg: ProtocolConfig, initial_state, store_states: bool = True
) -> TransferResult:
    schedule = build_schedule(cfg)
    constant = cfg.constant_phase if cfg.corrections == "constant" else None
    gen = _DriveGenerator(cfg, schedule, deltas=cfg.delta, constant_phases=constant)
    psi = np.asarray(initial_state, dtype=complex)
    if psi.shape != (3,):
        raise ProtocolError(f"initial state must be a single ket, got shape {psi.shape}")
    icfg = _integrator_config(cfg, gen, store_states=store_states, sample_stride=None)
    traj = integrate(gen.hamiltonian, psi, schedule.window, icfg)
    return TransferResult(config=cfg, schedule=schedule, trajectory=traj)


def run_stirap(cfg: ProtocolConfig, initial_state=None) -> TransferResult:
    """Bare STIRAP (no counterdiabatic drive), |0> -> |2> by default."""
    if cfg.cd_mode != "off":
        raise ProtocolError(
            f"run_stirap is the bare protocol; got cd_mode={cfg.cd_mode!r} "
            "(use run_sastirap)"
        )
    psi = basis_state(0) if initial_state is None else initial_state
    return _run_single(cfg, psi)


def run_sastirap(cfg: ProtocolConfig, initial_state=None) -> TransferResult:
    """Superadiabatic STIRAP: STIRAP plus the counterdiabatic 0-2 drive.

    With ``corrections == "constant"`` and no phase supplied, the constant
    0-2 phase is first calibrated by maximizing the final |2> population.
    """
    if cfg.cd_mode == "off":
        raise ProtocolError(
            "run_sastirap needs a counterdiabatic drive; set cd_mode to "
            "'ideal' or 'two_photon' (use run_stirap for the bare protocol)"
        )
    if cfg.corrections == "constant" and cfg.constant_phase is None:
        phase, _ = optimal_constant_phase(cfg)
        cfg = replace(cfg, constant_phase=phase)
    psi = basis_state(0) if initial_state is None else initial_state
    return _run_single(cfg, psi)


def run_detuned_sastirap(cfg: ProtocolConfig, initial_state=None) -> TransferResult:
    """Superadiabatic STIRAP at nonzero single-photon detuning.

    Sweeping the detuning negative pushes the 0-1 and 1-2 drive frequencies
    toward the two-photon tone and interference sets in, so negative values
    are permitted but flagged.
    """
    if cfg.delta < 0:
        warnings.warn(
            f"negative single-photon detuning {cfg.delta}: the drive tones "
            "approach the two-photon carrier and interfere",
            UserWarning,
            stacklevel=2,
        )
    return run_sastirap(cfg, initial_state)


# -- constant-phase calibration --------------------------------------------


def optimal_constant_phase(
    cfg: ProtocolConfig, n_coarse: int = 25
) -> tuple[float, float]:
    """Best constant 0-2 drive phase and the final |2> population it reaches.

    Scans ``n_coarse`` phases over (-pi, pi] in one batched run, then
    refines the best bracket with a bounded scalar minimizer to 1e-4 rad.
    The objective is the final population of |2> starting from |0>.
    """
    if cfg.cd_mode != "two_photon":
        raise ProtocolError("constant-phase calibration requires cd_mode='two_photon'")
    base = replace(cfg, corrections="constant", constant_phase=None)
    grid = np.linspace(-math.pi, math.pi, n_coarse + 1)[1:]
    traj = run_protocol_batch(base, basis_state(0), constant_phases=grid)
    p2 = traj.final_populations()[..., 2]
    best = int(np.argmax(p2))
    step = 2.0 * math.pi / n_coarse

    def objective(phase: float) -> float:
        t = run_protocol_batch(base, basis_state(0), constant_phases=phase)
        return -float(t.final_populations()[2])

    res = minimize_scalar(
        objective,
        bounds=(grid[best] - step, grid[best] + step),
        method="bounded",
        options={"xatol": 1e-4},
    )
    phase = float(res.x)
    if phase <= -math.pi:
        phase += 2.0 * math.pi
    elif phase > math.pi:
        phase -= 2.0 * math.pi
    return phase, -float(res.fun)


# -- NOT gate ----------------------------------------------------------------


def ideal_not_gate() -> np.ndarray:
    """Target unitary exp(i pi/2)|0><2| + exp(-i pi/2)|2><0| (identity on |1>)."""
    u = np.zeros((3, 3), dtype=complex)
    u[0, 2] = 1j
    u[2, 0] = -1j
    u[1, 1] = 1.0
    return u


def gate_initial_state(x: float) -> np.ndarray:
    """Gate test family sqrt(x)|0> + i sqrt(1-x)|2>, x in [0, 1]."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    psi = np.zeros(3, dtype=complex)
    psi[0] = math.sqrt(x)
    psi[2] = 1j * math.sqrt(1.0 - x)
    return psi


def state_fidelity(psi_initial, psi_final, gate: np.ndarray | None = None) -> float:
    """|<psi_final| U |psi_initial>|^2 against the target gate (NOT by default)."""
    u = ideal_not_gate() if gate is None else np.asarray(gate, dtype=complex)
    target = u @ np.asarray(psi_initial, dtype=complex)
    amp = np.vdot(np.asarray(psi_final, dtype=complex), target)
    return float(np.abs(amp) ** 2)


def _require_gate_config(cfg: ProtocolConfig) -> None:
    if cfg.frac is None:
        raise ProtocolError(
            "the NOT gate is a fractional double sequence; set cfg.frac"
        )
    if cfg.delta <= 0:
        raise ProtocolError(
            "the reversed second sub-sequence needs positive single-photon "
            f"detuning, got delta={cfg.delta}"
        )


def run_not_gate(
    cfg: ProtocolConfig, initial_state=None, *, x: float | None = None
) -> TransferResult:
    """Population-inverting gate: two fractional sequences back to back.

    The initial state may be given directly or through the family parameter
    ``x`` (``gate_initial_state``); default is |0>. Runs with any
    ``cd_mode`` — "off" gives the purely adiabatic gate used as a baseline.
    """
    _require_gate_config(cfg)
    if initial_state is not None and x is not None:
        raise ProtocolError("pass either initial_state or x, not both")
    if initial_state is None:
        initial_state = gate_initial_state(x) if x is not None else basis_state(0)
    if cfg.corrections == "constant" and cfg.constant_phase is None:
        phase, _ = optimal_constant_phase(cfg)
        cfg = replace(cfg, constant_phase=phase)
    return _run_single(cfg, initial_state)


def drive_hamiltonian(cfg: ProtocolConfig):
    """The configured run's Hamiltonian H(t) -> (3, 3) plus its time window.

    Exposes exactly what the protocol runners hand to the integrator (single
    member, no batch axes), so independent propagators — piecewise-constant
    matrix-exponential products, dense references — can cross-check the
    adaptive solution on any configuration.
    """
    schedule = build_schedule(cfg)
    constant = cfg.constant_phase if cfg.corrections == "constant" else None
    gen = _DriveGenerator(cfg, schedule, deltas=cfg.delta, constant_phases=constant)
    return gen.hamiltonian, schedule.window


def cd_magnitude(cfg: ProtocolConfig):
    """Unscaled two-photon drive magnitude |Omega02|(t), vectorized callable."""
    schedule = build_schedule(cfg)
    base = cfg if cfg.cd_mode == "two_photon" else replace(
        cfg, cd_mode="two_photon", corrections="none", constant_phase=None
    )
    return _DriveGenerator(base, schedule).magnitude02


def optimal_cd_amplitude(cfg: ProtocolConfig, n: int = 16385) -> float:
    """Peak of the two-photon drive magnitude realizing the masked CD pulse."""
    schedule = build_schedule(cfg)
    grid = np.linspace(schedule.window[0], schedule.window[1], n)
    return float(np.max(cd_magnitude(cfg)(grid)))


def not_gate_runner(cfg: ProtocolConfig):
    """Batched gate executor for fluctuation averages.

    Returns ``runner(amplitudes, phase_offsets, states) -> final states``
    where ``amplitudes`` are absolute two-photon peak drive rates (the
    calibrated optimum is exposed as ``runner.optimal_amplitude``) and
    ``phase_offsets`` are deviations of the 0-2 drive phase from its
    calibrated value, in radians.
    """
    _require_gate_config(cfg)
    if cfg.cd_mode != "two_photon":
        raise ProtocolError("fluctuation averages drive the physical two-photon tone")
    om_opt = optimal_cd_amplitude(cfg)

    def runner(amplitudes, phase_offsets, states):
        scales = np.asarray(amplitudes, dtype=float) / om_opt
        traj = run_protocol_batch(
            cfg,
            states,
            cd_scales=scales,
            phase_offsets=phase_offsets,
            store_states=False,
        )
        return traj.final_state

    runner.optimal_amplitude = om_opt
    return runner


# -- two-photon pi pulse ------------------------------------------------------


def pi_pulse_area_scale(cfg: ProtocolConfig, n: int = 16385) -> float:
    """Amplitude scale making the effective 0-2 rotation area exactly pi.

    The pi pulse reuses the counterdiabatic drive shape of ``cfg`` (masked,
    fractional if the configuration is) and rescales it so that
    int |Omega_eff| dt = pi at scale 1.
    """
    schedule = build_schedule(cfg)
    base = cfg if cfg.cd_mode == "two_photon" else replace(
        cfg, cd_mode="two_photon", corrections="none", constant_phase=None
    )
    gen = _DriveGenerator(base, schedule)
    grid = np.linspace(schedule.window[0], schedule.window[1], n)
    mag = gen.magnitude02(grid)
    eff = cfg.qutrit.lam * mag * mag / (2.0 * cfg.delta02_value)
    area = float(np.trapezoid(eff, grid))
    if area <= 0.0:
        raise ProtocolError("counterdiabatic shape has zero area; nothing to scale")
    return math.sqrt(math.pi / area)


def run_pi_pulse_batch(
    cfg: ProtocolConfig,
    initial_state,
    amp_scales=1.0,
    phase_offsets=0.0,
    *,
    store_states: bool = False,
) -> Trajectory:
    """Two-photon tone alone (STIRAP drives off), area pi at scale 1.

    The dynamical 0-2 phase correction is applied; the 0-1 and 1-2 channel
    corrections are moot because those drives are off.
    """
    base = replace(
        cfg, cd_mode="two_photon", corrections="dynamical", constant_phase=None
    )
    s_pi = pi_pulse_area_scale(cfg)
    scales = s_pi * np.asarray(amp_scales, dtype=float)
    return run_protocol_batch(
        base,
        initial_state,
        stirap_scales=0.0,
        cd_scales=scales,
        phase_offsets=phase_offsets,
        store_states=store_states,
    )


def pi_pulse_gate(
    cfg: ProtocolConfig,
    initial_state=None,
    amp_scale: float = 1.0,
    phase_offset: float = 0.0,
) -> TransferResult:
    """Direct 0-2 inversion by a resonant two-photon pi pulse."""
    psi = basis_state(0) if initial_state is None else np.asarray(initial_state, complex)
    traj = run_pi_pulse_batch(
        cfg, psi, amp_scales=amp_scale, phase_offsets=phase_offset, store_states=True
    )
    return TransferResult(config=cfg, schedule=build_schedule(cfg), trajectory=traj)


def pi_pulse_runner(cfg: ProtocolConfig):
    """Batched pi-pulse executor for fluctuation averages.

    Amplitudes are measured on the same axis as the gate's two-photon drive:
    the pulse is calibrated to area pi at the counterdiabatic optimum
    ``runner.optimal_amplitude``, and fluctuations scale it multiplicatively.
    """
    om_opt = optimal_cd_amplitude(cfg)

    def runner(amplitudes, phase_offsets, states):
        scales = np.asarray(amplitudes, dtype=float) / om_opt
        traj = run_pi_pulse_batch(cfg, states, amp_scales=scales, phase_offsets=phase_offsets)
        return traj.final_state

    runner.optimal_amplitude = om_opt
    return runner


# -- gate reconstruction ------------------------------------------------------


@dataclass(frozen=True)
class GateMatrix:
    """Gate matrix on the {|0>, |2>} subspace with its quality metrics.

    ``matrix`` columns are the images of |0> and |2>. ``leakage`` is the
    largest final |1> population across the probe runs; ``linearity_defect``
    is the norm distance between the superposition run and the superposed
    basis runs; ``unitarity_defect`` is ||G*G - 1||_F of the 2x2 block.
    """

    matrix: np.ndarray
    leakage: float
    linearity_defect: float
    unitarity_defect: float
    finals: np.ndarray


def reconstruct_gate_matrix(cfg: ProtocolConfig) -> GateMatrix:
    """Probe the gate with |0>, |2>, and their superposition in one batch."""
    _require_gate_config(cfg)
    if cfg.corrections == "constant" and cfg.constant_phase is None:
        phase, _ = optimal_constant_phase(cfg)
        cfg = replace(cfg, constant_phase=phase)
    plus = (basis_state(0) + basis_state(2)) / math.sqrt(2.0)
    probes = np.stack([basis_state(0), basis_state(2), plus])
    traj = run_protocol_batch(cfg, probes, store_states=False)
    finals = traj.final_state
    leakage = float(np.max(np.abs(finals[:, 1]) ** 2))
    if leakage > 0.05:
        raise ReconstructionError(
            f"{leakage:.3f} of the population leaked to |1>; the two-level "
            "gate matrix is not a faithful description of this run"
        )
    g = np.array(
        [
            [finals[0, 0], finals[1, 0]],
            [finals[0, 2], finals[1, 2]],
        ]
    )
    linearity = float(
        np.linalg.norm(finals[2] - (finals[0] + finals[1]) / math.sqrt(2.0))
    )
    unitarity = float(np.linalg.norm(g.conj().T @ g - np.eye(2)))
    return GateMatrix(
        matrix=g,
        leakage=leakage,
        linearity_defect=linearity,
        unitarity_defect=unitarity,
        finals=finals,
    )
