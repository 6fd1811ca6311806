"""Drive envelopes and counterdiabatic pulse shapes for three-level ladder control.

The transfer protocols in this package are built from two Gaussian envelopes

    Omega01(t) = A01 exp(-t^2 / 2 sigma^2),
    Omega12(t) = A12 exp(-(t - t_s)^2 / 2 sigma^2),

driving the 0-1 and 1-2 transitions. A negative pulse separation ``t_s``
applies the 1-2 pulse *before* the 0-1 pulse (the counterintuitive ordering
that makes stimulated Raman adiabatic passage work). The instantaneous mixing
angle

    tan Theta(t) = Omega01(t) / Omega12(t)

parametrizes the dark state cos(Theta)|0> - sin(Theta)|2>; sweeping Theta from
0 to pi/2 moves population from |0> to |2>. When a single-photon detuning
``delta`` is applied (equal and opposite on the two drives, preserving the
two-photon resonance), a second mixing angle appears,

    Phi(t) = arctan2(Omega_r, delta) / 2,   Omega_r = sqrt(Omega01^2 + Omega12^2),

which interpolates between the resonant value pi/4 (delta = 0) and 0
(drive off, delta > 0).

Counterdiabatic driving cancels the diabatic transitions of a finite-speed
sweep. For the resonant protocol it requires a 0-2 coupling with envelope
|Omega_cd| = 2 dTheta/dt at 90 degrees phase offset from the main drives; for
equal-amplitude Gaussians this takes the closed sech form implemented in
:func:`cd_envelope`. In a ladder system without a direct 0-2 dipole the
coupling is produced by a two-photon drive at half the 0-2 transition
frequency; :func:`two_photon_cd_envelope` converts the required effective
coupling into the physical two-photon amplitude. With the detuning on, the
full counterdiabatic Hamiltonian also needs small quadrature components on the
0-1 and 1-2 channels proportional to dPhi/dt, provided by
:func:`detuned_cd_terms`.

A NOT gate on the {|0>, |2>} subspace is built from two fractional sequences:
a full transfer followed, after a hold time ``tau``, by a fractional transfer
in reversed pulse order. The combined envelopes of
:func:`fractional_schedule` interpolate both sub-sequences with a fixed final
branching angle ``eta`` so the two accumulated mixing-angle phases cancel.

Apart from an overall time unit, all rates here are angular frequencies; the
rest of the package measures them in units of the qutrit anharmonicity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

__all__ = [
    "PulseError",
    "GaussianPulse",
    "EnvelopeSum",
    "PulseSchedule",
    "FractionalParams",
    "gaussian_envelope",
    "stirap_schedule",
    "fractional_schedule",
    "envelope_peak",
    "rabi_magnitude",
    "mixing_angle",
    "mixing_angle_rates",
    "cd_envelope",
    "two_photon_cd_envelope",
    "detuned_cd_terms",
    "drive_floor_mask",
    "pulse_area",
    "adiabaticity_metric",
    "global_adiabaticity",
]

#: Window-edge residual tolerance: envelopes must have decayed below this
#: fraction of their peak at the ends of the schedule window. The default
#: +-5 sigma window leaves Gaussian tails at exp(-12.5) ~ 3.7e-6 of peak.
EDGE_RESIDUAL = 1e-5

#: Default half-width of a schedule window in units of sigma.
WINDOW_PAD = 5.0


class PulseError(ValueError):
    """A pulse or schedule failed validation."""


@dataclass(frozen=True)
class GaussianPulse:
    """Gaussian envelope ``peak * exp(-(t - center)^2 / 2 sigma^2)``."""

    peak: float
    center: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise PulseError(f"sigma must be positive, got {self.sigma}")
        if self.peak < 0:
            raise PulseError(f"peak must be nonnegative, got {self.peak}")

    def value(self, t):
        u = (np.asarray(t, dtype=float) - self.center) / self.sigma
        return self.peak * np.exp(-0.5 * u * u)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return self.value(t) * (self.center - t) / self.sigma**2


@dataclass(frozen=True)
class EnvelopeSum:
    """Pointwise sum of Gaussian components (used by fractional sequences)."""

    parts: tuple[GaussianPulse, ...]

    def __post_init__(self) -> None:
        if not self.parts:
            raise PulseError("EnvelopeSum needs at least one component")

    def value(self, t):
        total = self.parts[0].value(t)
        for p in self.parts[1:]:
            total = total + p.value(t)
        return total

    def derivative(self, t):
        total = self.parts[0].derivative(t)
        for p in self.parts[1:]:
            total = total + p.derivative(t)
        return total


def gaussian_envelope(pulse, t):
    """Evaluate an envelope at time(s) ``t`` (thin functional wrapper)."""
    return pulse.value(t)


def envelope_peak(envelope, window: tuple[float, float], n: int = 4001) -> float:
    """Maximum of an envelope over ``window``, by dense sampling.

    Gaussian sums have no useful closed-form maximum; 4001 points over a
    10-sigma window sample every sigma/400, ample for smooth envelopes.
    """
    t = np.linspace(window[0], window[1], n)
    return float(np.max(envelope.value(t)))


@dataclass(frozen=True)
class PulseSchedule:
    """A pair of 0-1 / 1-2 drive envelopes with a common time window.

    ``sigma`` and ``t_s`` record the base Gaussian width and pulse separation
    used to derive counterdiabatic shapes and integration strides; ``window``
    is the simulated time span, wide enough that both envelopes are
    negligible at its ends.

    ``segments`` lists the envelope pairs of the adiabatic sub-sequences the
    schedule is made of, in the same (env01, env12) order. Counterdiabatic
    terms must be derived per segment: between sub-sequences the *combined*
    drive ratio swings through a full relabeling of the adiabatic basis while
    carrying no population, and a counterdiabatic pulse that chased it would
    physically rotate the state instead. A plain schedule is its own single
    segment (``segments = None``).
    """

    env01: GaussianPulse | EnvelopeSum
    env12: GaussianPulse | EnvelopeSum
    sigma: float
    t_s: float
    window: tuple[float, float]
    segments: tuple[tuple[GaussianPulse | EnvelopeSum, GaussianPulse | EnvelopeSum], ...] | None = None

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise PulseError(f"sigma must be positive, got {self.sigma}")
        lo, hi = self.window
        if not lo < hi:
            raise PulseError(f"empty schedule window {self.window}")
        for name, env in (("env01", self.env01), ("env12", self.env12)):
            peak = envelope_peak(env, self.window)
            if peak == 0.0:
                continue
            edge = max(float(np.max(env.value(lo))), float(np.max(env.value(hi))))
            if edge > EDGE_RESIDUAL * peak:
                raise PulseError(
                    f"{name} has not decayed at the window edges: "
                    f"residual {edge:.3e} exceeds {EDGE_RESIDUAL:.0e} x peak {peak:.3e}; "
                    "widen the window"
                )
        if self.segments is not None:
            # The segments must tile the combined envelopes: anything else
            # would make the counterdiabatic drive inconsistent with the
            # pulses it corrects.
            grid = np.linspace(lo, hi, 2001)
            for name, env, idx in (("env01", self.env01, 0), ("env12", self.env12, 1)):
                total = sum(pair[idx].value(grid) for pair in self.segments)
                err = float(np.max(np.abs(total - env.value(grid))))
                scale = envelope_peak(env, self.window) or 1.0
                if err > 1e-9 * scale:
                    raise PulseError(
                        f"segment envelopes do not sum to {name}: "
                        f"max deviation {err:.3e} on a peak of {scale:.3e}"
                    )

    @property
    def cd_segments(self):
        """Envelope pairs to build counterdiabatic terms from, one per sub-sequence."""
        if self.segments is None:
            return ((self.env01, self.env12),)
        return self.segments


def stirap_schedule(
    omega01_peak: float,
    omega12_peak: float,
    sigma: float,
    t_s: float,
    pad: float = WINDOW_PAD,
) -> PulseSchedule:
    """Standard two-Gaussian schedule: 0-1 pulse at t = 0, 1-2 pulse at t = t_s.

    The window spans ``pad`` sigmas beyond the outermost pulse center on each
    side (default 5 sigma, leaving edge residuals below 1e-5 of peak).
    """
    window = (min(0.0, t_s) - pad * sigma, max(0.0, t_s) + pad * sigma)
    return PulseSchedule(
        env01=GaussianPulse(omega01_peak, 0.0, sigma),
        env12=GaussianPulse(omega12_peak, t_s, sigma),
        sigma=sigma,
        t_s=t_s,
        window=window,
    )


@dataclass(frozen=True)
class FractionalParams:
    """Branching angle and sub-sequence delay of a fractional double sequence.

    ``eta`` fixes the final drive ratio tan(eta) = Omega01/Omega12 of the
    second (reversed, fractional) sub-sequence; eta = pi/4 makes the two
    sub-sequences mirror images, the setting used for the NOT gate. ``tau``
    is the delay between the sub-sequences.
    """

    eta: float = math.pi / 4
    tau: float | None = None  # defaults to 10 sigma when the schedule is built

    def __post_init__(self) -> None:
        if not 0.0 <= self.eta <= math.pi / 2:
            raise PulseError(f"eta must lie in [0, pi/2], got {self.eta}")
        if self.tau is not None and not self.tau > 0:
            raise PulseError(f"tau must be positive, got {self.tau}")


def fractional_schedule(base: PulseSchedule, frac: FractionalParams) -> PulseSchedule:
    """Combined envelopes of a full transfer plus a delayed fractional reverse.

    With g01, g12 the base Gaussians (centers 0 and t_s) and tau the delay,

        env01F(t) = g01(t) + cos(eta) g12(t) + sin(eta) g01(t - tau),
        env12F(t) = sin(eta) g12(t) + g12(t - tau) + cos(eta) g01(t - tau).

    The first sub-sequence starts from drive ratio cot(eta) and sweeps the
    mixing angle to pi/2; the second, in reversed pulse order, brings it back
    from 0 to eta, with both channels dying off in the fixed ratio tan(eta).
    The base schedule must consist of two single Gaussians.

    The result carries the two sub-sequences as separate ``segments``: each is
    an adiabatic process of its own, with its own mixing angles. Stitching
    them together makes the *combined* drive ratio swing from pi/2 back to 0
    across the gap, but that swing is a relabeling of the adiabatic basis in a
    region where the drives are off, not a physical rotation — counterdiabatic
    shaping must therefore work from the per-segment envelopes, never the sum.
    """
    if not isinstance(base.env01, GaussianPulse) or not isinstance(
        base.env12, GaussianPulse
    ):
        raise PulseError("fractional_schedule needs a plain two-Gaussian base")
    g01, g12 = base.env01, base.env12
    tau = frac.tau if frac.tau is not None else 10.0 * base.sigma
    if tau <= abs(base.t_s):
        raise PulseError(
            f"sub-sequence delay tau={tau} must exceed the pulse separation "
            f"|t_s|={abs(base.t_s)}"
        )
    s, c = math.sin(frac.eta), math.cos(frac.eta)

    def shifted(g: GaussianPulse, scale: float, shift: float) -> GaussianPulse:
        return GaussianPulse(g.peak * scale, g.center + shift, g.sigma)

    first = (
        EnvelopeSum((shifted(g01, 1.0, 0.0), shifted(g12, c, 0.0))),
        EnvelopeSum((shifted(g12, s, 0.0),)),
    )
    second = (
        EnvelopeSum((shifted(g01, s, tau),)),
        EnvelopeSum((shifted(g12, 1.0, tau), shifted(g01, c, tau))),
    )
    env01 = EnvelopeSum(first[0].parts + second[0].parts)
    env12 = EnvelopeSum(first[1].parts + second[1].parts)
    # Extend the base window margins around the union of both sub-sequences.
    lead = min(0.0, base.t_s) - base.window[0]
    tail = base.window[1] - max(0.0, base.t_s)
    window = (min(0.0, base.t_s) - lead, tau + max(0.0, base.t_s) + tail)
    return PulseSchedule(
        env01=env01,
        env12=env12,
        sigma=base.sigma,
        t_s=base.t_s,
        window=window,
        segments=(first, second),
    )


def rabi_magnitude(schedule: PulseSchedule, t):
    """Total drive magnitude Omega_r(t) = sqrt(Omega01^2 + Omega12^2)."""
    e01 = schedule.env01.value(t)
    e12 = schedule.env12.value(t)
    return np.hypot(e01, e12)


def mixing_angle(schedule: PulseSchedule, t):
    """Dark-state mixing angle Theta(t) = arctan2(Omega01, Omega12) in [0, pi/2].

    Where both envelopes underflow to exactly zero the angle is undefined;
    values there are forward-filled from the last defined time (array input)
    or rejected (scalar input, or no defined time earlier in the array).
    """
    e01 = np.asarray(schedule.env01.value(t), dtype=float)
    e12 = np.asarray(schedule.env12.value(t), dtype=float)
    dead = (e01 == 0.0) & (e12 == 0.0)
    theta = np.arctan2(e01, e12)
    if not np.any(dead):
        return theta if theta.ndim else float(theta)
    if theta.ndim == 0:
        raise PulseError(f"mixing angle undefined at t={float(t)}: both drives are zero")
    if dead[0]:
        raise PulseError(
            "mixing angle undefined at the start of the requested times: "
            "both drives are zero with no earlier defined value to hold"
        )
    # Forward-fill: hold the last defined angle through dead stretches.
    idx = np.arange(theta.size)
    defined = np.where(~dead, idx, 0)
    np.maximum.accumulate(defined, out=defined)
    return theta[defined]


def mixing_angle_rates(schedule: PulseSchedule, delta: float, t):
    """Angular velocities (dTheta/dt, dPhi/dt) of the two mixing angles.

        dTheta/dt = (dOmega01 Omega12 - Omega01 dOmega12) / Omega_r^2
        dPhi/dt   = delta * dOmega_r/dt / (2 (Omega_r^2 + delta^2))

    Both vanish identically where the drives are off (the 0/0 limit is
    resolved to 0, which is the correct continuation for decayed Gaussians).
    """
    e01 = np.asarray(schedule.env01.value(t), dtype=float)
    e12 = np.asarray(schedule.env12.value(t), dtype=float)
    d01 = np.asarray(schedule.env01.derivative(t), dtype=float)
    d12 = np.asarray(schedule.env12.derivative(t), dtype=float)
    r2 = e01 * e01 + e12 * e12
    safe = np.where(r2 > 0.0, r2, 1.0)
    theta_dot = np.where(r2 > 0.0, (d01 * e12 - e01 * d12) / safe, 0.0)
    r = np.sqrt(r2)
    r_dot = np.where(r > 0.0, (e01 * d01 + e12 * d12) / np.where(r > 0.0, r, 1.0), 0.0)
    phi_dot = delta * r_dot / (2.0 * (r2 + delta * delta))
    if np.ndim(t) == 0:
        return float(theta_dot), float(phi_dot)
    return theta_dot, phi_dot


def cd_envelope(schedule: PulseSchedule, t):
    """Counterdiabatic 0-2 envelope 2 dTheta/dt exp(i pi/2) in closed form.

    Valid for the standard schedule of two equal-amplitude Gaussians, where

        Omega_cd(t) = (|t_s| / sigma^2) sech[(|t_s| / sigma^2)(t - t_s/2)] e^{i pi/2}.

    Its magnitude peaks at |t_s|/sigma^2 at the midpoint t = t_s/2 and
    integrates to exactly pi (a half rotation of the mixing angle, 0 -> pi/2).
    """
    if not isinstance(schedule.env01, GaussianPulse) or not isinstance(
        schedule.env12, GaussianPulse
    ):
        raise PulseError("cd_envelope needs a plain two-Gaussian schedule")
    g01, g12 = schedule.env01, schedule.env12
    if abs(g01.peak - g12.peak) > 1e-12 * max(g01.peak, g12.peak, 1e-300):
        raise PulseError(
            "closed-form counterdiabatic envelope requires equal pulse amplitudes; "
            f"got {g01.peak} and {g12.peak}"
        )
    if g01.center != 0.0 or g12.center != schedule.t_s or schedule.t_s == 0.0:
        raise PulseError(
            "closed-form counterdiabatic envelope requires pulse centers 0 and t_s != 0"
        )
    rate = abs(schedule.t_s) / schedule.sigma**2
    u = np.asarray(t, dtype=float) - 0.5 * schedule.t_s
    sign = 1.0 if schedule.t_s < 0.0 else -1.0
    return sign * 1j * rate / np.cosh(rate * u)


def two_photon_cd_envelope(t_s: float, sigma: float, delta02: float, lam: float, t):
    """Physical two-photon drive realizing the counterdiabatic 0-2 coupling.

    Returns ``(magnitude, phase)`` of the drive at half the 0-2 transition
    frequency whose second-order effective coupling equals the sech-shaped
    counterdiabatic envelope:

        |Omega02(t)| = sqrt(2 |t_s| delta02 / (lam sigma^2 cosh[(|t_s|/sigma^2)(t - t_s/2)]))
        phase        = -pi/4  (constant; the effective coupling doubles it and
                               picks up an extra pi from its overall minus sign).
    """
    if t_s >= 0.0:
        raise PulseError("two-photon counterdiabatic shape requires t_s < 0")
    if delta02 <= 0.0 or lam <= 0.0:
        raise PulseError("two-photon counterdiabatic shape requires delta02 > 0, lam > 0")
    rate = abs(t_s) / sigma**2
    u = np.asarray(t, dtype=float) - 0.5 * t_s
    mag = np.sqrt(2.0 * delta02 * rate / (lam * np.cosh(rate * u)))
    return mag, np.full_like(mag, -0.25 * math.pi)


def detuned_cd_terms(schedule: PulseSchedule, delta: float, t):
    """Real coefficients (a01, a12, a02) of the detuned counterdiabatic term.

    The counterdiabatic Hamiltonian at single-photon detuning ``delta`` is
    the real antisymmetric generator

        H_cd = i hbar [[0, a01, a02], [-a01, 0, a12], [-a02, -a12, 0]]

    with a01 = dPhi sin(Theta), a12 = -dPhi cos(Theta), a02 = dTheta. At
    delta = 0 only the 0-2 term survives.
    """
    theta = mixing_angle(schedule, t)
    theta_dot, phi_dot = mixing_angle_rates(schedule, delta, t)
    a01 = phi_dot * np.sin(theta)
    a12 = -phi_dot * np.cos(theta)
    a02 = theta_dot
    return a01, a12, a02


def drive_floor_mask(magnitude, peak: float, floor: float = 1e-3, power: int = 8):
    """Smooth gate that switches counterdiabatic terms off where the drive is off.

    Evaluates 1 / (1 + (floor * peak / magnitude)^power): ~1 wherever the
    total drive magnitude exceeds ``floor`` of its peak, ~0 below. The mixing
    angles are ratios of envelopes and keep rotating in the far tails where
    the physical drives carry no power; following them there would demand
    counterdiabatic pulses far outside the perturbative regime (and, between
    fractional sub-sequences, would undo the transfer). The smooth eighth-order
    rolloff keeps the Hamiltonian C^1 for the adaptive integrator.
    """
    mag = np.asarray(magnitude, dtype=float)
    lvl = floor * peak
    with np.errstate(divide="ignore", over="ignore"):
        ratio = np.where(mag > 0.0, lvl / np.where(mag > 0.0, mag, 1.0), np.inf)
        gate = 1.0 / (1.0 + ratio**power)
    return gate


def pulse_area(envelope, window: tuple[float, float]) -> float:
    """Time integral of an envelope over the window (adaptive quadrature).

    Accepts an envelope object or a plain callable. Gaussian component
    centers are passed to the quadrature as known features so narrow pulses
    inside long windows are not missed.
    """
    if hasattr(envelope, "value"):
        fn = lambda x: float(envelope.value(x))  # noqa: E731
    else:
        fn = lambda x: float(envelope(x))  # noqa: E731
    points = None
    if isinstance(envelope, GaussianPulse):
        points = [envelope.center]
    elif isinstance(envelope, EnvelopeSum):
        points = [p.center for p in envelope.parts]
    if points is not None:
        points = [p for p in points if window[0] < p < window[1]]
    area, _ = quad(fn, window[0], window[1], points=points or None,
                   epsabs=0.0, epsrel=1e-10, limit=400)
    return area


def adiabaticity_metric(schedule: PulseSchedule, t) -> float:
    """Local adiabaticity ratio max_± |<±|d/dt|D>| / |omega_± - omega_D|.

    For the resonant protocol both bright states couple to the dark state
    with rate |dTheta/dt| / sqrt(2) and sit at +-Omega_r/2, so the metric is
    sqrt(2) |dTheta/dt| / Omega_r. Values well below 1 mean adiabatic
    following; the metric is undefined where the drives vanish (degenerate
    eigenvalues) and raises there.
    """
    r = rabi_magnitude(schedule, t)
    if np.any(np.asarray(r) == 0.0):
        raise PulseError(
            "adiabaticity metric undefined: eigenvalues are degenerate where "
            "the total drive vanishes"
        )
    theta_dot, _ = mixing_angle_rates(schedule, 0.0, t)
    out = math.sqrt(2.0) * np.abs(theta_dot) / r
    return float(out) if np.ndim(t) == 0 else out


def global_adiabaticity(schedule: PulseSchedule) -> float:
    """Whole-protocol adiabaticity: integrated coupling over integrated gap.

    Integrates |<±|d/dt|D>| = |dTheta/dt|/sqrt(2) and the gap |omega_± - omega_D|
    = Omega_r/2 separately over the window and returns their ratio, which for
    the standard schedule scales as 1/(sigma Omega): long or strong pulse
    pairs are adiabatic, short weak ones are not.
    """
    num = quad(
        lambda x: abs(mixing_angle_rates(schedule, 0.0, x)[0]) / math.sqrt(2.0),
        schedule.window[0],
        schedule.window[1],
        epsabs=0.0,
        epsrel=1e-9,
        limit=400,
    )[0]
    den = quad(
        lambda x: 0.5 * float(rabi_magnitude(schedule, x)),
        schedule.window[0],
        schedule.window[1],
        epsabs=0.0,
        epsrel=1e-9,
        limit=400,
    )[0]
    return num / den
