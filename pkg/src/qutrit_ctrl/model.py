"""Three-level ladder model, frames, and Hamiltonian builders.

The system is a weakly anharmonic ladder (a transmon qutrit): levels |0>, |1>,
|2> with transition frequencies omega01 and omega12 and anharmonicity
Delta = omega01 - omega12 > 0. The direct 0-2 dipole transition is forbidden;
a 0-2 coupling can only be produced as a two-photon process by driving at
half the 0-2 frequency. Throughout the package hbar = 1 and rates are
measured in units of Delta (so the default anharmonicity is 1 and times are
in 1/Delta).

Sign and frame conventions, used consistently everywhere:

* Detunings are transition minus drive: delta01 = omega01 - omega01_drive,
  delta12 = omega12 - omega12_drive, and for the two-photon tone
  delta02 = omega01 - omega02_drive (its drive sits delta02 below the 0-1
  transition; the drive is two-photon resonant with 0-2 when
  delta02 = Delta/2). Positive delta01 therefore means the drive is *below*
  the bare transition. Spectroscopy reports probe axes as drive minus
  transition, the negative of these fields.

* Every drive contributes (1/2) * A(t) * e^{i phi} to the [lower, upper]
  matrix element of its channel (the Hermitian conjugate fills the lower
  triangle).

* The doubly rotating frame (at the 0-1 and 1-2 drive frequencies) gives the
  time-independent-carrier Hamiltonian

      H = 1/2 [[0,        Omega01,   0       ],
               [Omega01,  2 delta01, Omega12 ],
               [0,        Omega12,   2 (delta01 + delta12)]].

* The carrier ("interaction picture") backend keeps every tone's residual
  carrier explicitly: each tone adds (1/2) A(t) e^{-i delta_chan t} to its
  channel's [lower, upper] element, where delta_chan is transition minus
  drive *for that channel*. A two-photon tone drives both channels at once:
  delta_chan = delta02 on 0-1 and delta02 - Delta on 1-2, the latter with the
  ladder coupling ratio lambda.

At two-photon resonance (delta01 + delta12 = 0) the rotating-frame
Hamiltonian diagonalizes in terms of two mixing angles: the dark state
|D> = cos(Theta)|0> - sin(Theta)|2> with tan(Theta) = Omega01/Omega12 stays
at zero energy, and the bright pair

    |+> = sin(Phi)|B> + cos(Phi)|1>,   |-> = cos(Phi)|B> - sin(Phi)|1>,

with |B> = sin(Theta)|0> + cos(Theta)|2> and Phi = arctan2(Omega_r, delta01)/2,
sits at omega_± = (delta01 ± sqrt(delta01^2 + Omega_r^2)) / 2 where
Omega_r^2 = Omega01^2 + Omega12^2. At zero detuning Phi = pi/4; as the drives
die with delta01 > 0, Phi -> 0 and |-> -> |B>, which is what lets a detuned
sequence invert populations in the {|0>, |2>} subspace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DegenerateDriveError",
    "QutritParams",
    "DriveDetunings",
    "InstantaneousBasis",
    "DriveTone",
    "basis_state",
    "populations",
    "build_rwa_hamiltonian",
    "instantaneous_eigensystem",
    "build_effective_hamiltonian",
    "build_carrier_hamiltonian",
]


class DegenerateDriveError(ValueError):
    """The instantaneous eigensystem is requested where it is not defined."""


@dataclass(frozen=True)
class QutritParams:
    """Ladder spectrum and relative 1-2 drive coupling.

    ``lam`` is the ratio of the 1-2 to 0-1 matrix elements seen by a single
    drive tone; for a transmon it is close to sqrt(2). Absolute frequencies
    only matter through the anharmonicity.
    """

    omega01: float = 10.0
    omega12: float = 9.0
    lam: float = 1.0

    def __post_init__(self) -> None:
        if self.anharmonicity <= 0:
            raise ValueError(
                f"anharmonicity omega01 - omega12 must be positive, got "
                f"{self.anharmonicity}"
            )
        if self.lam <= 0:
            raise ValueError(f"lam must be positive, got {self.lam}")

    @property
    def anharmonicity(self) -> float:
        return self.omega01 - self.omega12

    @property
    def omega02(self) -> float:
        return self.omega01 + self.omega12


@dataclass(frozen=True)
class DriveDetunings:
    """Detunings (transition minus drive) of the three tones.

    ``delta02`` is the two-photon tone's offset from the 0-1 transition and
    defaults to Delta/2, i.e. exact two-photon resonance with 0-2.
    """

    delta01: float = 0.0
    delta12: float = 0.0
    delta02: float = 0.5

    @classmethod
    def two_photon_resonant(
        cls, delta: float, delta02: float | None = None, big_delta: float = 1.0
    ) -> "DriveDetunings":
        """Single-photon detuning ``delta`` split as delta01 = -delta12 = delta."""
        if delta02 is None:
            delta02 = 0.5 * big_delta
        return cls(delta01=delta, delta12=-delta, delta02=delta02)

    @property
    def is_two_photon_resonant(self) -> bool:
        scale = max(abs(self.delta01), abs(self.delta12), 1.0)
        return abs(self.delta01 + self.delta12) <= 1e-12 * scale

    def require_two_photon_resonance(self) -> None:
        if not self.is_two_photon_resonant:
            raise ValueError(
                "two-photon resonance delta01 + delta12 = 0 required, got "
                f"delta01={self.delta01}, delta12={self.delta12}"
            )


def basis_state(level: int) -> np.ndarray:
    """Computational basis ket |level> as a complex vector."""
    if level not in (0, 1, 2):
        raise ValueError(f"level must be 0, 1, or 2, got {level}")
    psi = np.zeros(3, dtype=complex)
    psi[level] = 1.0
    return psi


def populations(psi: np.ndarray) -> np.ndarray:
    """Occupation probabilities |<k|psi>|^2 along the last axis."""
    return np.abs(np.asarray(psi)) ** 2


def build_rwa_hamiltonian(
    omega01_rabi: float, omega12_rabi: float, det: DriveDetunings
) -> np.ndarray:
    """Doubly-rotating-frame Hamiltonian for instantaneous drive values."""
    return 0.5 * np.array(
        [
            [0.0, omega01_rabi, 0.0],
            [omega01_rabi, 2.0 * det.delta01, omega12_rabi],
            [0.0, omega12_rabi, 2.0 * (det.delta01 + det.delta12)],
        ],
        dtype=complex,
    )


@dataclass(frozen=True)
class InstantaneousBasis:
    """Adiabatic frame at one instant: mixing angles, eigenvalues, eigenvectors."""

    theta: float
    phi: float
    omega_plus: float
    omega_minus: float
    omega_dark: float
    vec_plus: np.ndarray
    vec_minus: np.ndarray
    vec_dark: np.ndarray


def instantaneous_eigensystem(
    omega01_rabi: float, omega12_rabi: float, delta01: float
) -> InstantaneousBasis:
    """Analytic eigensystem of the two-photon-resonant rotating-frame Hamiltonian.

    Requires a nonvanishing total drive: with both envelopes zero the bright
    pair degenerates with the dark state and the basis in the {|0>, |2>}
    subspace loses meaning.
    """
    if omega01_rabi < 0 or omega12_rabi < 0:
        raise DegenerateDriveError(
            "drive amplitudes must be nonnegative, got "
            f"({omega01_rabi}, {omega12_rabi})"
        )
    r = math.hypot(omega01_rabi, omega12_rabi)
    if r == 0.0:
        raise DegenerateDriveError(
            "instantaneous basis undefined: both drive amplitudes are zero"
        )
    theta = math.atan2(omega01_rabi, omega12_rabi)
    phi = 0.5 * math.atan2(r, delta01)
    root = math.hypot(delta01, r)
    sin_t, cos_t = math.sin(theta), math.cos(theta)
    sin_p, cos_p = math.sin(phi), math.cos(phi)
    bright = np.array([sin_t, 0.0, cos_t], dtype=complex)
    mid = np.array([0.0, 1.0, 0.0], dtype=complex)
    dark = np.array([cos_t, 0.0, -sin_t], dtype=complex)
    return InstantaneousBasis(
        theta=theta,
        phi=phi,
        omega_plus=0.5 * (delta01 + root),
        omega_minus=0.5 * (delta01 - root),
        omega_dark=0.0,
        vec_plus=sin_p * bright + cos_p * mid,
        vec_minus=cos_p * bright - sin_p * mid,
        vec_dark=dark,
    )


def build_effective_hamiltonian(
    omega01_rabi: float,
    omega12_rabi: float,
    omega_eff: complex,
    eps: Sequence[float],
    phases: Sequence[float],
    det: DriveDetunings,
) -> np.ndarray:
    """Rotating-frame Hamiltonian with the two-photon drive folded in.

    The physical two-photon tone is replaced by its second-order effects: the
    complex effective 0-2 coupling ``omega_eff`` and the level shifts
    ``eps = (eps0, eps1, eps2)``. ``phases = (phi01, phi12, phi02)`` are the
    instantaneous dynamical correction phases applied to the three drives
    (zero when uncorrected). All arguments are values at one instant; the
    envelope bookkeeping lives in the protocol layer.
    """
    eps0, eps1, eps2 = eps
    phi01, phi12, phi02 = phases
    h = np.zeros((3, 3), dtype=complex)
    h[0, 0] = eps0
    h[1, 1] = eps1 + det.delta01
    h[2, 2] = eps2 + det.delta01 + det.delta12
    h[0, 1] = 0.5 * omega01_rabi * np.exp(1j * phi01)
    h[1, 2] = 0.5 * omega12_rabi * np.exp(1j * phi12)
    h[0, 2] = 0.5 * omega_eff * np.exp(1j * phi02)
    h[1, 0] = np.conj(h[0, 1])
    h[2, 1] = np.conj(h[1, 2])
    h[2, 0] = np.conj(h[0, 2])
    return h


@dataclass(frozen=True)
class DriveTone:
    """One carrier tone: a channel, a complex envelope, and its detuning.

    ``channel`` is "01", "12", or "02"; the detuning is transition minus
    drive on the tone's primary channel (for "02" that is the offset from the
    0-1 transition). The envelope is a callable of time returning the complex
    amplitude A(t) e^{i phi(t)}.
    """

    channel: str
    envelope: Callable[[np.ndarray], np.ndarray]
    detuning: float

    def __post_init__(self) -> None:
        if self.channel not in ("01", "12", "02"):
            raise ValueError(f"unknown drive channel {self.channel!r}")


def build_carrier_hamiltonian(
    tones: Sequence[DriveTone], params: QutritParams, t: float
) -> np.ndarray:
    """Interaction-picture Hamiltonian with explicit residual carriers.

    Each tone adds (1/2) A(t) e^{-i delta_chan t} to the [lower, upper]
    element of its channel. A "02" tone drives both channels: with amplitude
    A on 0-1 (delta_chan = delta02) and lambda * A on 1-2
    (delta_chan = delta02 - Delta). No rotating-wave dropping beyond the bare
    level removal is performed, so ac-Stark physics emerges dynamically.
    """
    big_delta = params.anharmonicity
    h01 = 0.0 + 0.0j
    h12 = 0.0 + 0.0j
    for tone in tones:
        amp = tone.envelope(t)
        if tone.channel == "01":
            h01 += 0.5 * amp * np.exp(-1j * tone.detuning * t)
        elif tone.channel == "12":
            h12 += 0.5 * amp * np.exp(-1j * tone.detuning * t)
        else:  # two-photon tone
            h01 += 0.5 * amp * np.exp(-1j * tone.detuning * t)
            h12 += 0.5 * params.lam * amp * np.exp(-1j * (tone.detuning - big_delta) * t)
    h = np.zeros((3, 3), dtype=complex)
    h[0, 1] = h01
    h[1, 2] = h12
    h[1, 0] = np.conj(h01)
    h[2, 1] = np.conj(h12)
    return h
