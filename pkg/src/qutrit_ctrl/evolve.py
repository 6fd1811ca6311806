"""Schrödinger-equation integration for (batches of) three-level systems.

The propagation problem here is always i d|psi>/dt = H(t)|psi> with H a 3x3
Hermitian matrix — but the sweeps in this package run thousands of such
systems that differ only in drive parameters. The integrator therefore works
on arrays of shape (..., 3): ``h_fn(t)`` returns Hamiltonians broadcastable
to (..., 3, 3) and every batch member advances through the *same* adaptive
step sequence, with the step controller driven by the worst member. That
keeps the error bound uniform across a sweep while amortizing the Python
overhead over the whole batch, which is what makes the large parameter scans
feasible.

Dormand-Prince 5(4) with the first-same-as-last trick supplies the embedded
error estimate. Steps are clipped so they land exactly on a uniform sample
grid (default stride chosen by the caller, typically sigma/50): observables
are then read at exact step endpoints and no dense-output interpolation error
enters. Norm is *not* renormalized by default — the drift of ||psi|| is a
free integration-quality diagnostic and stays within an order of magnitude
of the relative tolerance for well-posed runs.

:func:`propagator_oracle` provides an independent check: a midpoint-rule
product of matrix exponentials (computed by Hermitian eigendecomposition,
unitary to machine precision). It converges only quadratically in the step
count but shares no code with the Runge-Kutta path, which is what makes it a
useful oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "IntegrationFailure",
    "IntegratorConfig",
    "Trajectory",
    "integrate",
    "propagator_oracle",
    "averaged_population",
    "final_populations",
]


class IntegrationFailure(RuntimeError):
    """The adaptive controller could not advance (step underflow or blowup)."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive-step controls.

    ``sample_stride`` sets the uniform observable grid the stepper lands on;
    ``None`` records only the window endpoints. ``renormalize`` restores the
    state norm after each accepted step and is off by default so norm drift
    remains observable.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    first_step: float | None = None
    sample_stride: float | None = None
    store_states: bool = True
    renormalize: bool = False
    max_steps: int = 20_000_000

    def __post_init__(self) -> None:
        if self.rel_tol <= 0 or self.abs_tol < 0:
            raise ValueError("tolerances must be positive")
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")


@dataclass(frozen=True)
class Trajectory:
    """Result of one propagation: sample times, states, and step statistics."""

    times: np.ndarray
    states: np.ndarray | None
    final_state: np.ndarray
    n_accepted: int
    n_rejected: int

    def populations(self) -> np.ndarray:
        """|psi_k(t)|^2 at the sample times, shape (n_samples, ..., 3)."""
        if self.states is None:
            raise ValueError("trajectory was run without state storage")
        return np.abs(self.states) ** 2

    def final_populations(self) -> np.ndarray:
        return np.abs(self.final_state) ** 2

    def norm_drift(self) -> float:
        """Largest deviation of any member's norm from 1 over the samples."""
        if self.states is None:
            norms = np.linalg.norm(self.final_state, axis=-1)
            return float(np.max(np.abs(norms - 1.0)))
        norms = np.linalg.norm(self.states, axis=-1)
        return float(np.max(np.abs(norms - 1.0)))


def final_populations(traj: Trajectory) -> np.ndarray:
    """Occupations at the end of the run, shape (..., 3)."""
    return traj.final_populations()


def averaged_population(traj: Trajectory, level: int) -> np.ndarray | float:
    """Time-averaged occupation of ``level`` over the trajectory (trapezoid)."""
    if level not in (0, 1, 2):
        raise ValueError(f"level must be 0, 1, or 2, got {level}")
    pops = traj.populations()[..., level]  # (n_samples, ...)
    t = traj.times
    avg = np.trapezoid(pops, t, axis=0) / (t[-1] - t[0])
    return float(avg) if np.ndim(avg) == 0 else avg


# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_ERR = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


def _sample_grid(window: tuple[float, float], stride: float | None) -> np.ndarray:
    t0, t1 = float(window[0]), float(window[1])
    if t0 == t1:
        raise ValueError("empty integration window")
    if stride is None:
        return np.array([t0, t1])
    n = max(2, int(math.ceil(abs(t1 - t0) / abs(stride))) + 1)
    return np.linspace(t0, t1, n)


def integrate(
    h_fn: Callable[[float], np.ndarray],
    psi0: np.ndarray,
    window: tuple[float, float],
    cfg: IntegratorConfig = IntegratorConfig(),
    observer: Callable[[float, np.ndarray], None] | None = None,
) -> Trajectory:
    """Propagate psi0 over the window under H(t) = ``h_fn(t)``.

    ``psi0`` may carry leading batch dimensions, (..., 3); ``h_fn`` must
    return an array broadcastable to (..., 3, 3). Backward windows
    (t1 < t0) integrate in negative time. ``observer(t, psi)`` fires at every
    sample-grid point, including both endpoints, whether or not states are
    stored — sweeps use it to accumulate running averages without keeping
    trajectories in memory.
    """
    psi = np.array(psi0, dtype=complex)
    if psi.shape[-1] != 3:
        raise ValueError(f"state must have last dimension 3, got shape {psi.shape}")
    samples = _sample_grid(window, cfg.sample_stride)
    direction = 1.0 if samples[-1] > samples[0] else -1.0
    span = abs(samples[-1] - samples[0])

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        h = h_fn(t)
        return -1j * np.einsum("...ij,...j->...i", h, y)

    def err_norm(y0: np.ndarray, y1: np.ndarray, diff: np.ndarray) -> float:
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y0), np.abs(y1))
        ratio = np.abs(diff) / scale
        # RMS over the 3 components of each member, worst member governs.
        member = np.sqrt(np.mean(ratio * ratio, axis=-1))
        return float(np.max(member))

    stored = [psi.copy()] if cfg.store_states else None
    if observer is not None:
        observer(float(samples[0]), psi)

    h_abs = cfg.first_step if cfg.first_step is not None else min(
        span / 100.0, cfg.max_step
    )
    t = float(samples[0])
    k1 = rhs(t, psi)
    n_accepted = 0
    n_rejected = 0
    k = [None] * 7

    for target in samples[1:]:
        target = float(target)
        while direction * (target - t) > 0.0:
            remaining = abs(target - t)
            h_try = min(h_abs, remaining, cfg.max_step)
            if h_try < 1e-14 * max(abs(t), span):
                raise IntegrationFailure(
                    f"step size underflow at t={t} (step {h_try}); the problem "
                    "is too stiff for the requested tolerances"
                )
            h = direction * h_try
            k[0] = k1
            for i in range(1, 7):
                yi = psi + h * sum(a * k[j] for j, a in enumerate(_A[i]))
                k[i] = rhs(t + _C[i] * h, yi)
            y_new = psi + h * sum(b * k[j] for j, b in enumerate(_B5) if b != 0.0)
            diff = h * sum(e * k[j] for j, e in enumerate(_ERR) if e != 0.0)
            if not np.all(np.isfinite(y_new)):
                err = math.inf
            else:
                err = err_norm(psi, y_new, diff)
            if err <= 1.0:
                t_new = t + h
                if abs(target - t_new) < 1e-12 * max(abs(target), 1.0):
                    t_new = target
                psi = y_new
                if cfg.renormalize:
                    psi = psi / np.linalg.norm(psi, axis=-1, keepdims=True)
                    k1 = rhs(t_new, psi)
                else:
                    k1 = k[6]  # first-same-as-last
                t = t_new
                n_accepted += 1
                factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err**-0.2))
                h_abs = h_try * factor
            else:
                n_rejected += 1
                factor = 0.1 if not math.isfinite(err) else max(0.1, 0.9 * err**-0.2)
                h_abs = h_try * min(0.9, factor)
            if n_accepted + n_rejected > cfg.max_steps:
                raise IntegrationFailure(
                    f"exceeded {cfg.max_steps} steps at t={t}; check the "
                    "Hamiltonian for runaway time scales"
                )
        if cfg.store_states:
            stored.append(psi.copy())
        if observer is not None:
            observer(t, psi)

    return Trajectory(
        times=samples,
        states=np.array(stored) if cfg.store_states else None,
        final_state=psi,
        n_accepted=n_accepted,
        n_rejected=n_rejected,
    )


def propagator_oracle(
    h_fn: Callable[[float], np.ndarray],
    window: tuple[float, float],
    n_steps: int,
) -> np.ndarray:
    """Midpoint exponential-product propagator, independent of the RK path.

    U = prod_k exp(-i H(t_k + dt/2) dt) with the exponential taken through a
    Hermitian eigendecomposition, so each factor is unitary to machine
    precision. Second-order accurate in dt; use enough steps rather than
    expecting adaptivity.
    """
    t0, t1 = float(window[0]), float(window[1])
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    dt = (t1 - t0) / n_steps
    u = np.eye(3, dtype=complex)
    for i in range(n_steps):
        tm = t0 + (i + 0.5) * dt
        h = np.asarray(h_fn(tm), dtype=complex)
        if h.shape != (3, 3):
            raise ValueError(
                "propagator oracle handles a single system; h_fn must return "
                f"a (3, 3) matrix, got {h.shape}"
            )
        w, v = np.linalg.eigh(h)
        u = (v * np.exp(-1j * w * dt)) @ v.conj().T @ u
    return u
