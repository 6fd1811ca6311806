"""Two-photon effective coupling, ac-Stark shifts, and dynamical phase corrections.

A tone at half the 0-2 transition frequency cannot drive 0-1 or 1-2
resonantly, but in second order it does two things at once:

* it creates an effective 0-2 coupling

      Omega_eff = - lam * Omega02^2 / (2 delta02),

  where Omega02 is the *complex* drive amplitude (the effective phase is
  twice the drive phase, plus pi from the sign) and delta02 is the offset of
  the drive below the 0-1 transition;

* it ac-Stark shifts all three levels:

      eps0 = -|Omega02|^2 / (4 delta02)
      eps1 = +|Omega02|^2 / (4 delta02) + lam^2 |Omega02|^2 / (4 (Delta - delta02))
      eps2 = -lam^2 |Omega02|^2 / (4 (Delta - delta02)),

  which sum to zero, and shift the transitions by eps01 = eps1 - eps0,
  eps12 = eps2 - eps1, eps02 = eps2 - eps0 (so eps01 + eps12 = eps02
  identically). For lam = 1 and delta02 = Delta/2 the 0-1 and 1-2 shifts are
  equal and opposite and the 0-2 transition is unshifted.

With a time-varying envelope the shifts cannot be absorbed into static drive
detunings. Instead each drive is given the dynamical phase

    phi_ij(t) = integral of eps_ij from the window start to t,

which makes it track its shifted transition exactly (the 0-2 tone receives
half of phi_02 because the two-photon process doubles the drive phase). The
shifts scale with |Omega02|^2, so all phases are the same quadrature
Q(t) = int |Omega02|^2 scaled by per-transition coefficients — a fact the
sweep layer exploits to rescale precomputed phases under amplitude noise.

The formulas have simple poles at delta02 = 0 and delta02 = Delta (drive
resonant with 0-1 or 1-2); a guard band of 1e-6 Delta around each pole
raises instead of returning nonsense. Adiabatic elimination additionally
assumes |delta02| >> |Omega02|; a ratio below 3 triggers a warning.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "StarkPoleError",
    "WeakEliminationWarning",
    "LevelShifts",
    "DynamicalPhases",
    "shift_coefficients",
    "level_shifts",
    "effective_coupling",
    "adiabatic_eliminated_hamiltonian",
    "dynamical_phases",
]

#: Guard half-width (in units of the anharmonicity) around the delta02 poles.
POLE_GUARD = 1e-6

#: Warn when |delta02| / |Omega02| drops below this.
ELIMINATION_RATIO = 3.0


class StarkPoleError(ValueError):
    """delta02 sits on (or hugs) a pole of the second-order formulas."""


class WeakEliminationWarning(UserWarning):
    """Adiabatic elimination is being stretched: drive not weak against delta02."""


def _check_poles(delta02: float, big_delta: float) -> None:
    if big_delta <= 0:
        raise StarkPoleError(f"anharmonicity must be positive, got {big_delta}")
    guard = POLE_GUARD * big_delta
    if abs(delta02) < guard:
        raise StarkPoleError(
            f"delta02={delta02} is within {guard} of the 0-1 resonance pole"
        )
    if abs(big_delta - delta02) < guard:
        raise StarkPoleError(
            f"delta02={delta02} is within {guard} of the 1-2 resonance pole "
            f"(Delta={big_delta})"
        )


def shift_coefficients(
    delta02: float, big_delta: float, lam: float
) -> tuple[float, float, float, float, float, float]:
    """Shift-per-|Omega02|^2 coefficients (c0, c1, c2, c01, c12, c02)."""
    _check_poles(delta02, big_delta)
    a = 1.0 / (4.0 * delta02)
    b = lam * lam / (4.0 * (big_delta - delta02))
    c0 = -a
    c1 = a + b
    c2 = -b
    return c0, c1, c2, c1 - c0, c2 - c1, c2 - c0


@dataclass(frozen=True)
class LevelShifts:
    """ac-Stark level shifts and the derived transition shifts.

    Fields follow the drive amplitude(s) they were evaluated at: scalars for
    a scalar |Omega02|, arrays for an array.
    """

    eps0: np.ndarray | float
    eps1: np.ndarray | float
    eps2: np.ndarray | float
    eps01: np.ndarray | float
    eps12: np.ndarray | float
    eps02: np.ndarray | float


def level_shifts(
    mag02, delta02: float, big_delta: float, lam: float
) -> LevelShifts:
    """Second-order shifts for two-photon drive magnitude(s) ``mag02``."""
    c0, c1, c2, c01, c12, c02 = shift_coefficients(delta02, big_delta, lam)
    m2 = np.square(np.asarray(mag02, dtype=float))
    if m2.ndim == 0:
        m2 = float(m2)
    return LevelShifts(
        eps0=c0 * m2,
        eps1=c1 * m2,
        eps2=c2 * m2,
        eps01=c01 * m2,
        eps12=c12 * m2,
        eps02=c02 * m2,
    )


def effective_coupling(omega02, delta02: float, lam: float):
    """Effective 0-2 coupling -lam * Omega02^2 / (2 delta02).

    ``omega02`` is the complex two-photon amplitude; its phase enters twice.
    Warns when the drive is not small against delta02 and the second-order
    picture starts to bend.
    """
    if abs(delta02) < POLE_GUARD:
        raise StarkPoleError(
            f"delta02={delta02} is within {POLE_GUARD} (anharmonicity units) "
            "of the 0-1 resonance pole"
        )
    amp = np.asarray(omega02, dtype=complex)
    peak = float(np.max(np.abs(amp)))
    if peak > 0.0 and abs(delta02) / peak < ELIMINATION_RATIO:
        warnings.warn(
            f"adiabatic elimination marginal: |delta02|/|Omega02| = "
            f"{abs(delta02) / peak:.2f} < {ELIMINATION_RATIO}",
            WeakEliminationWarning,
            stacklevel=2,
        )
    out = -lam * amp * amp / (2.0 * delta02)
    return complex(out) if out.ndim == 0 else out


def adiabatic_eliminated_hamiltonian(
    omega02: complex, delta02: float, big_delta: float, lam: float
) -> np.ndarray:
    """0-2 block Hamiltonian after eliminating the intermediate level.

    In the frame rotating at the two-photon drive frequency, with the |1>
    amplitude slaved to its neighbors, the dynamics reduces to

        H_ae = 1/2 [[-|A|^2/(2 d),      0,  -lam A^2/(2 d)],
                    [0,                 0,  0             ],
                    [-lam A*^2/(2 d),   0,  4 d - 2 Delta - lam^2 |A|^2/(2 d)]]

    with A = Omega02 and d = delta02. The middle row and column vanish
    identically — the two-photon process acts only on {|0>, |2>}.
    """
    _check_poles(delta02, big_delta)
    a = complex(omega02)
    mag2 = abs(a) ** 2
    h = np.zeros((3, 3), dtype=complex)
    h[0, 0] = 0.5 * (-mag2 / (2.0 * delta02))
    h[2, 2] = 0.5 * (4.0 * delta02 - 2.0 * big_delta - lam * lam * mag2 / (2.0 * delta02))
    h[0, 2] = 0.5 * (-lam * a * a / (2.0 * delta02))
    h[2, 0] = np.conj(h[0, 2])
    return h


@dataclass(frozen=True)
class DynamicalPhases:
    """Cumulative correction phases phi_ij(t) = int eps_ij over the window.

    Built once per protocol from the two-photon magnitude envelope; holds the
    quadrature Q(t) = int |Omega02|^2 as a spline and scales it by the
    per-transition coefficients. Outside the window the phases continue
    constantly (zero before, final value after), matching a drive that is off.
    """

    window: tuple[float, float]
    coeff01: float
    coeff12: float
    coeff02: float
    _quad: object
    _mag_env: Callable

    def quad_value(self, t):
        """Q(t) = int_{t0}^{min(t, t1)} |Omega02|^2 dtau, clamped outside."""
        t0, t1 = self.window
        return self._quad(np.clip(t, t0, t1))

    def phi01(self, t):
        return self.coeff01 * self.quad_value(t)

    def phi12(self, t):
        return self.coeff12 * self.quad_value(t)

    def phi02(self, t):
        return self.coeff02 * self.quad_value(t)

    def rates(self, t):
        """Instantaneous shifts (eps01, eps12, eps02)(t) — the phase velocities."""
        m2 = np.square(np.asarray(self._mag_env(t), dtype=float))
        return self.coeff01 * m2, self.coeff12 * m2, self.coeff02 * m2


def dynamical_phases(
    mag02: Callable,
    delta02: float,
    big_delta: float,
    lam: float,
    window: tuple[float, float],
    n: int = 8193,
) -> DynamicalPhases:
    """Integrate the shift rates of a magnitude envelope into correction phases.

    ``mag02`` is a callable returning |Omega02|(t) (vectorized). The squared
    envelope is interpolated with a cubic spline on ``n`` points and
    integrated exactly as a piecewise polynomial, so the reported phases are
    differentiable and their derivative matches the shift rates to the
    spline's interpolation error (~(dt)^4, far below any tolerance in use).
    """
    _, _, _, c01, c12, c02 = shift_coefficients(delta02, big_delta, lam)
    t0, t1 = window
    if not t0 < t1:
        raise ValueError(f"empty phase window {window}")
    t = np.linspace(t0, t1, n)
    m2 = np.square(np.asarray(mag02(t), dtype=float))
    quad = CubicSpline(t, m2).antiderivative()
    return DynamicalPhases(
        window=(float(t0), float(t1)),
        coeff01=c01,
        coeff12=c12,
        coeff02=c02,
        _quad=quad,
        _mag_env=mag02,
    )
