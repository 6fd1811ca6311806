"""Figure-scale computations behind the command-line interface.

Each ``cmd_*`` function takes a validated job and returns named result
grids. Two kinds of computation live here.

Pulsed sweeps (transfer, delta-amplitude maps, gate scans, robustness)
lean on the batched protocol runner: every grid cell is one member of a
single integrator call, so a 41 x 41 map costs one propagation of a
stacked state array rather than 1681 separate runs.

Continuous-wave spectroscopy is different: the drives are constant tones,
the signal is a time-averaged population, and the natural frame is the
bare rotating frame where every tone enters as exp(-i delta_field t) with
its own detuning. Probe detunings are *reported* in the experimentalist's
convention, drive frequency minus transition frequency, which is the
negative of the field detuning appearing in the Hamiltonian. A probe line
therefore sits at the ac-Stark shift of its transition: +eps01 on the 0-1
probe while the two-photon tone runs, and at zero again once the drive
phases are modulated with the accumulated shifts (the corrected variant).
Time averages are accumulated by a running trapezoid inside the
integrator's observer, so no trajectory is ever stored; a 101 x 101 panel
with both variants propagates ~20000 members at once.

Where a computation decomposes into independent cells (per-amplitude
spectroscopy columns, fluctuation-average grid points), ``threads`` bounds
a worker pool over those cells; results are gathered in deterministic
order regardless of scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .evolve import IntegratorConfig, integrate
from .jobio import ConfigError, JobConfig, SweepResult, validate_options
from .model import DegenerateDriveError, basis_state
from .protocols import (
    ProtocolConfig,
    ProtocolError,
    build_schedule,
    cd_magnitude,
    gate_initial_state,
    ideal_not_gate,
    not_gate_runner,
    optimal_constant_phase,
    pi_pulse_area_scale,
    pi_pulse_runner,
    run_protocol_batch,
    run_sastirap,
)
from .pulses import FractionalParams, PulseError, pulse_area
from .robustness import FluctuationSpec, averaged_fidelity, fidelity_landscape
from .stark import dynamical_phases, level_shifts

__all__ = [
    "cmd_spectroscopy_2d",
    "cmd_spectroscopy_amp",
    "cmd_transfer",
    "cmd_sweep_delta_amp",
    "cmd_gate_scan",
    "cmd_robustness",
    "run_command",
]


# -- option validation helpers -------------------------------------------------


def _opt_number(lo=None, hi=None, lo_open: bool = False):
    def check(value, where):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}")
        x = float(value)
        if not math.isfinite(x):
            raise ConfigError(f"{where} must be finite, got {value!r}")
        if lo is not None and (x < lo or (lo_open and x == lo)):
            op = ">" if lo_open else ">="
            raise ConfigError(f"{where} must be {op} {lo}, got {x}")
        if hi is not None and x > hi:
            raise ConfigError(f"{where} must be <= {hi}, got {x}")
        return x

    return check


def _opt_int(lo: int):
    def check(value, where):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        if value < lo:
            raise ConfigError(f"{where} must be >= {lo}, got {value}")
        return int(value)

    return check


def _opt_choice(*allowed):
    def check(value, where):
        if value not in allowed:
            raise ConfigError(f"{where} must be one of {list(allowed)}, got {value!r}")
        return value

    return check


def _check_axes(job: JobConfig, allowed: tuple) -> None:
    for name in job.axes:
        if name not in allowed:
            raise ConfigError(
                f"axes: '{name}' is not a sweep axis of {job.command} "
                f"(allowed: {sorted(allowed)})"
            )


def _axis(job: JobConfig, name: str, default) -> np.ndarray:
    return np.asarray(job.axes.get(name, default), dtype=float)


def _thread_map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


# -- continuous-wave core -------------------------------------------------------


class _RunningMean:
    """Trapezoid accumulator for a time-averaged population."""

    def __init__(self, level: int, shape: tuple):
        self.level = level
        self.total = np.zeros(shape)
        self._prev_t = None
        self._prev_p = None

    def __call__(self, t: float, psi: np.ndarray) -> None:
        p = np.abs(psi[..., self.level]) ** 2
        if self._prev_t is not None:
            self.total += 0.5 * (t - self._prev_t) * (p + self._prev_p)
        self._prev_t, self._prev_p = t, p

    def value(self, span: float) -> np.ndarray:
        return self.total / span


def _cw_average_population(
    *,
    amp02,
    delta02,
    lam: float,
    big_delta: float,
    t_final: float,
    initial: int,
    level: int,
    probe_channel: str | None = None,
    probe_amp: float = 0.0,
    probe_detuning=0.0,
    probe_phase_rate=0.0,
    tp_phase_rate=0.0,
    rel_tol: float = 1e-7,
    abs_tol: float = 1e-9,
    n_samples: int = 2048,
) -> np.ndarray:
    """Time-averaged population under constant tones, batched over members.

    ``amp02``/``delta02`` describe the two-photon tone (driving both ladder
    channels, the upper one scaled by lam); an optional probe tone runs on
    one channel at the reported detuning (drive minus transition). Phase
    rates are the linear drive-phase modulations of the corrected variant.
    Member arrays broadcast; singleton structure is preserved so the
    per-step exponentials stay cheap.
    """
    amp02 = np.asarray(amp02, dtype=float)
    delta02 = np.asarray(delta02, dtype=float)
    probe_detuning = np.asarray(probe_detuning, dtype=float)
    probe_phase_rate = np.asarray(probe_phase_rate, dtype=float)
    tp_phase_rate = np.asarray(tp_phase_rate, dtype=float)

    shape = np.broadcast_shapes(
        amp02.shape,
        delta02.shape,
        probe_detuning.shape,
        probe_phase_rate.shape,
        tp_phase_rate.shape,
    )
    half02 = 0.5 * amp02
    half12 = lam * half02
    halfp = 0.5 * probe_amp

    # Fastest carrier present, for the integrator's step cap.
    rates = [
        np.max(np.abs(tp_phase_rate - delta02)),
        np.max(np.abs(tp_phase_rate - delta02 + big_delta)),
    ]
    if probe_channel is not None:
        rates.append(np.max(np.abs(probe_phase_rate + probe_detuning)))
    top_rate = float(max(rates))
    max_step = 0.5 / top_rate if top_rate > 0 else math.inf

    h = np.zeros(shape + (3, 3), dtype=complex)

    def h_fn(t: float) -> np.ndarray:
        f02 = np.exp(1j * t * (tp_phase_rate - delta02))
        h01 = half02 * f02
        h12 = half12 * f02 * np.exp(1j * big_delta * t)
        if probe_channel is not None:
            pe = (
                halfp
                * np.exp(1j * t * probe_phase_rate)
                * np.exp(1j * t * probe_detuning)
            )
            if probe_channel == "01":
                h01 = h01 + pe
            else:
                h12 = h12 + pe
        h[..., 0, 1] = h01
        h[..., 1, 2] = h12
        h[..., 1, 0] = np.conj(h01)
        h[..., 2, 1] = np.conj(h12)
        return h

    psi0 = np.broadcast_to(basis_state(initial), shape + (3,)).copy()
    mean = _RunningMean(level, shape)
    cfg = IntegratorConfig(
        rel_tol=rel_tol,
        abs_tol=abs_tol,
        max_step=max_step,
        sample_stride=t_final / n_samples,
        store_states=False,
    )
    integrate(h_fn, psi0, (0.0, t_final), cfg, observer=mean)
    return mean.value(t_final)


def _transition_shifts(amp02: float, delta02_axis, big_delta: float, lam: float):
    """Per-delta02 transition shifts (eps01, eps12, eps02) arrays."""
    shifts = [
        level_shifts(amp02, float(d), big_delta, lam) for d in np.atleast_1d(delta02_axis)
    ]
    eps01 = np.array([s.eps01 for s in shifts])
    eps12 = np.array([s.eps12 for s in shifts])
    eps02 = np.array([s.eps02 for s in shifts])
    return eps01, eps12, eps02


# -- spectroscopy commands ------------------------------------------------------

_SPEC2D_OPTIONS = {
    "probe": (_opt_choice("01", "12"), "01"),
    "lam": (_opt_number(lo=0, lo_open=True), 1.0),
    "amp02": (_opt_number(lo=0), 0.2),
    "probe_amp": (_opt_number(lo=0, lo_open=True), 0.001),
    "rel_tol": (_opt_number(lo=0, lo_open=True), 1e-7),
    "abs_tol": (_opt_number(lo=0, lo_open=True), 1e-9),
    "samples": (_opt_int(16), 2048),
}


def cmd_spectroscopy_2d(job: JobConfig, threads: int = 1) -> list:
    """Probe-line map over (two-photon detuning, probe detuning).

    Emits the uncorrected and phase-corrected intermediate-level signal
    side by side: the uncorrected ridge follows the ac-Stark shift of the
    probed transition, the corrected one sits at zero reported detuning.
    """
    opts = validate_options(job.options, _SPEC2D_OPTIONS)
    _check_axes(job, ("delta02", "probe_detuning"))
    big_delta = job.protocol.big_delta
    d02_axis = _axis(job, "delta02", np.linspace(0.35, 0.65, 101))
    probe_axis = _axis(job, "probe_detuning", np.linspace(-0.15, 0.15, 101))
    lam, m, probe_amp = opts["lam"], opts["amp02"], opts["probe_amp"]
    t_final = math.pi / probe_amp

    eps01, eps12, eps02 = _transition_shifts(m, d02_axis, big_delta, lam)
    probe_eps = eps01 if opts["probe"] == "01" else eps12
    nd = d02_axis.size
    # Members: (variant, delta02, probe detuning); variant 0 uncorrected.
    pr_rate = np.zeros((2, nd, 1))
    pr_rate[1, :, 0] = probe_eps
    tp_rate = np.zeros((2, nd, 1))
    tp_rate[1, :, 0] = 0.5 * eps02

    grids = _cw_average_population(
        amp02=m,
        delta02=d02_axis[None, :, None],
        lam=lam,
        big_delta=big_delta,
        t_final=t_final,
        initial=0 if opts["probe"] == "01" else 2,
        level=1,
        probe_channel=opts["probe"],
        probe_amp=probe_amp,
        probe_detuning=probe_axis[None, None, :],
        probe_phase_rate=pr_rate,
        tp_phase_rate=tp_rate,
        rel_tol=opts["rel_tol"],
        abs_tol=opts["abs_tol"],
        n_samples=opts["samples"],
    )
    result = SweepResult(
        kind="spectroscopy-2d",
        axes={"delta02": d02_axis, "probe_detuning": probe_axis},
        values={"p1_uncorrected": grids[0], "p1_corrected": grids[1]},
        metadata={
            "units": {
                "delta02": "Delta",
                "probe_detuning": "Delta",
                "p1_uncorrected": "1",
                "p1_corrected": "1",
            },
            "probe": opts["probe"],
            "lam": lam,
            "amp02": m,
            "probe_amp": probe_amp,
            "t_final": t_final,
            "predicted_ridge": probe_eps,
        },
    )
    return [("spectroscopy_2d", result)]


_SPECAMP_OPTIONS = {
    "panel": (_opt_choice("all", "01", "12", "02"), "all"),
    "lam": (_opt_number(lo=0, lo_open=True), math.sqrt(2.0)),
    "delta02": (_opt_number(lo=0, lo_open=True), None),
    "probe_amp": (_opt_number(lo=0, lo_open=True), 0.001),
    "t_cap": (_opt_number(lo=0, lo_open=True), 3000.0),
    "rel_tol": (_opt_number(lo=0, lo_open=True), 1e-7),
    "abs_tol": (_opt_number(lo=0, lo_open=True), 1e-9),
    "samples": (_opt_int(16), 2048),
}


def cmd_spectroscopy_amp(job: JobConfig, threads: int = 1) -> list:
    """Stark shifts versus drive amplitude, and the two-photon resonance.

    Probe panels scan (probe detuning x |Omega02|) at a fixed two-photon
    detuning slightly off Delta/2 and show both probe lines bending
    quadratically with the drive. The third panel drives the two-photon
    resonance alone over (delta02 x |Omega02|), holding each column for the
    duration of an on-resonance pi rotation (capped for vanishing drives);
    the time-averaged |2> signal peaks at ~0.5 on a line shifted by
    -eps02/2 from delta02 = Delta/2.
    """
    opts = validate_options(job.options, _SPECAMP_OPTIONS)
    _check_axes(job, ("amp02", "probe_detuning", "delta02"))
    big_delta = job.protocol.big_delta
    lam, probe_amp = opts["lam"], opts["probe_amp"]
    d02_fixed = opts["delta02"]
    if d02_fixed is None:
        d02_fixed = big_delta / 2.0 + big_delta / 60.0
    amp_axis = _axis(job, "amp02", np.linspace(0.0, 0.2, 101))
    probe_axis = _axis(job, "probe_detuning", np.linspace(-0.15, 0.15, 101))
    d02_axis = _axis(job, "delta02", np.linspace(0.45, 0.6, 101))
    common = {
        "rel_tol": opts["rel_tol"],
        "abs_tol": opts["abs_tol"],
        "n_samples": opts["samples"],
    }
    units = {"amp02": "Delta", "probe_detuning": "Delta", "delta02": "Delta"}
    results = []

    def probe_panel(channel: str):
        eps01, eps12, _ = _transition_shifts(1.0, [d02_fixed], big_delta, lam)
        coeff = float(eps01[0] if channel == "01" else eps12[0])
        grid = _cw_average_population(
            amp02=amp_axis[:, None],
            delta02=d02_fixed,
            lam=lam,
            big_delta=big_delta,
            t_final=math.pi / probe_amp,
            initial=0 if channel == "01" else 2,
            level=1,
            probe_channel=channel,
            probe_amp=probe_amp,
            probe_detuning=probe_axis[None, :],
            **common,
        )
        return SweepResult(
            kind=f"spectroscopy-amp-probe{channel}",
            axes={"amp02": amp_axis, "probe_detuning": probe_axis},
            values={"p1": grid},
            metadata={
                "units": {**units, "p1": "1"},
                "lam": lam,
                "delta02": d02_fixed,
                "probe_amp": probe_amp,
                "predicted_ridge": coeff * amp_axis**2,
            },
        )

    def twophoton_panel():
        nominal = big_delta / 2.0
        grid = np.zeros((d02_axis.size, amp_axis.size))
        t_cols = np.zeros(amp_axis.size)

        def column(j: int):
            m = float(amp_axis[j])
            if m == 0.0:
                return 0.0, np.zeros(d02_axis.size)
            t_col = min(opts["t_cap"], math.pi * 2.0 * nominal / (lam * m * m))
            col = _cw_average_population(
                amp02=m,
                delta02=d02_axis,
                lam=lam,
                big_delta=big_delta,
                t_final=t_col,
                initial=0,
                level=2,
                **common,
            )
            return t_col, col

        for j, (t_col, col) in enumerate(
            _thread_map(column, range(amp_axis.size), threads)
        ):
            t_cols[j] = t_col
            grid[:, j] = col
        _, _, eps02 = _transition_shifts(1.0, [nominal], big_delta, lam)
        predicted = nominal - 0.5 * float(eps02[0]) * amp_axis**2
        return SweepResult(
            kind="spectroscopy-amp-twophoton",
            axes={"delta02": d02_axis, "amp02": amp_axis},
            values={"p2": grid},
            metadata={
                "units": {**units, "p2": "1", "t_final": "1/Delta"},
                "lam": lam,
                "t_final": t_cols,
                "t_cap": opts["t_cap"],
                "predicted_resonance": predicted,
            },
        )

    panel = opts["panel"]
    if panel in ("all", "01"):
        results.append(("spectroscopy_amp_probe01", probe_panel("01")))
    if panel in ("all", "12"):
        results.append(("spectroscopy_amp_probe12", probe_panel("12")))
    if panel in ("all", "02"):
        results.append(("spectroscopy_amp_twophoton", twophoton_panel()))
    return results


# -- pulsed commands ------------------------------------------------------------


def cmd_transfer(job: JobConfig, threads: int = 1) -> list:
    """One superadiabatic transfer, dynamically and constantly corrected.

    Propagates the same drive twice — once with the accumulated-phase
    corrections, once with the best single constant 0-2 phase — and emits
    the population trajectories together with the correction phases
    themselves. The constant phase is calibrated on the spot.
    """
    validate_options(job.options, {})
    _check_axes(job, ())
    cfg = job.protocol
    cfg_dyn = replace(
        cfg, cd_mode="two_photon", corrections="dynamical", constant_phase=None
    )
    cfg_const = replace(
        cfg, cd_mode="two_photon", corrections="constant", constant_phase=None
    )
    r_dyn = run_sastirap(cfg_dyn)
    phase, _ = optimal_constant_phase(cfg_const)
    r_const = run_sastirap(replace(cfg_const, constant_phase=phase))

    times = r_dyn.trajectory.times
    p_dyn = r_dyn.trajectory.populations()
    p_const = r_const.trajectory.populations()
    phases = dynamical_phases(
        cd_magnitude(cfg_dyn),
        cfg.delta02_value,
        cfg.big_delta,
        cfg.qutrit.lam,
        r_dyn.schedule.window,
    )
    area01 = pulse_area(r_dyn.schedule.env01, r_dyn.schedule.window)
    area12 = pulse_area(r_dyn.schedule.env12, r_dyn.schedule.window)
    analytic = math.sqrt(2.0 * math.pi) * cfg.sigma * cfg.omega01_peak

    values = {
        "p0_dynamical": p_dyn[:, 0],
        "p1_dynamical": p_dyn[:, 1],
        "p2_dynamical": p_dyn[:, 2],
        "p0_constant": p_const[:, 0],
        "p1_constant": p_const[:, 1],
        "p2_constant": p_const[:, 2],
        "phi01": np.asarray(phases.phi01(times), dtype=float),
        "phi12": np.asarray(phases.phi12(times), dtype=float),
        "phi02": np.asarray(phases.phi02(times), dtype=float),
    }
    units = {"time": "1/Delta"}
    units.update({k: "1" for k in values if k.startswith("p")})
    units.update({k: "rad" for k in values if k.startswith("phi")})
    result = SweepResult(
        kind="transfer",
        axes={"time": times},
        values=values,
        metadata={
            "units": units,
            "final_dynamical": p_dyn[-1],
            "final_constant": p_const[-1],
            "p2_gap": float(p_dyn[-1, 2] - p_const[-1, 2]),
            "constant_phase": phase,
            "dark_overlap_dynamical": r_dyn.dark_overlap(),
            "area01": area01,
            "area12": area12,
            "area_analytic": analytic,
        },
    )
    return [("transfer", result)]


def cmd_sweep_delta_amp(job: JobConfig, threads: int = 1) -> list:
    """Transfer maps over (single-photon detuning, STIRAP amplitude).

    Three grids from two batched runs: bare STIRAP |0> -> |2>, the
    superadiabatic protocol with dynamical corrections, and the same drive
    run backward from |2>. The counterdiabatic drive is scale-invariant
    (the mixing angle sees only the envelope ratio), so all amplitudes
    share one two-photon pulse.
    """
    validate_options(job.options, {})
    _check_axes(job, ("delta", "omega"))
    cfg = job.protocol
    if cfg.omega01_peak != cfg.omega12_peak:
        raise ConfigError(
            "sweep-delta-amp scales both drives together; set equal "
            "omega01_peak and omega12_peak"
        )
    delta_axis = _axis(job, "delta", np.linspace(0.0, 0.2, 41))
    omega_axis = _axis(job, "omega", np.linspace(1.0 / 24.0, 1.0 / 6.0, 41))
    if np.any(omega_axis <= 0):
        raise ConfigError("axes: omega values must be positive drive amplitudes")
    scales = omega_axis / cfg.omega01_peak

    bare = replace(cfg, cd_mode="off", corrections="none", constant_phase=None)
    sa = replace(cfg, cd_mode="two_photon", corrections="dynamical", constant_phase=None)

    traj_bare = run_protocol_batch(
        bare,
        basis_state(0),
        deltas=delta_axis[:, None],
        stirap_scales=scales[None, :],
    )
    p2_stirap = traj_bare.final_populations()[..., 2]

    # Forward from |0> and reverse from |2> in the same call.
    starts = np.stack([basis_state(0), basis_state(2)])[:, None, None, :]
    traj_sa = run_protocol_batch(
        sa,
        starts,
        deltas=delta_axis[:, None],
        stirap_scales=scales[None, :],
    )
    pops = traj_sa.final_populations()
    p2_sa = pops[0, ..., 2]
    p0_rev = pops[1, ..., 0]

    result = SweepResult(
        kind="sweep-delta-amp",
        axes={"delta": delta_axis, "omega": omega_axis},
        values={
            "p2_stirap": p2_stirap,
            "p2_sastirap": p2_sa,
            "p0_reverse": p0_rev,
        },
        metadata={
            "units": {
                "delta": "Delta",
                "omega": "Delta",
                "p2_stirap": "1",
                "p2_sastirap": "1",
                "p0_reverse": "1",
            },
            "min_p2_sastirap": float(np.min(p2_sa)),
            "min_p2_stirap": float(np.min(p2_stirap)),
            "sigma": cfg.sigma,
            "t_s": cfg.t_s,
            "lam": cfg.qutrit.lam,
        },
    )
    return [("sweep_delta_amp", result)]


def _gate_config(cfg: ProtocolConfig) -> ProtocolConfig:
    """Fill the documented gate defaults: fractional sequence, delta = 0.1."""
    if cfg.frac is None:
        cfg = replace(cfg, frac=FractionalParams())
    if cfg.delta == 0.0:
        cfg = replace(cfg, delta=0.1)
    return cfg


def _gate_fidelities(finals: np.ndarray, initials: np.ndarray) -> np.ndarray:
    target = initials @ ideal_not_gate().T
    amp = np.sum(np.conj(finals) * target, axis=-1)
    return np.abs(amp) ** 2


def cmd_gate_scan(job: JobConfig, threads: int = 1) -> list:
    """Gate action across the initial-state family sqrt(x)|0> + i sqrt(1-x)|2>.

    Runs the fractional double sequence with the two-photon drive (the
    gate) and without it (the adiabatic baseline, population-correct but
    phase-wrong) over a grid of x, reporting final |2> populations and
    fidelities against the target unitary.
    """
    validate_options(job.options, {})
    _check_axes(job, ("x",))
    cfg = _gate_config(job.protocol)
    x_axis = _axis(job, "x", np.linspace(0.0, 1.0, 11))
    if np.any(x_axis < 0) or np.any(x_axis > 1):
        raise ConfigError("axes: x values must lie in [0, 1]")
    sa = replace(cfg, cd_mode="two_photon", corrections="dynamical", constant_phase=None)
    bare = replace(cfg, cd_mode="off", corrections="none", constant_phase=None)
    psi = np.stack([gate_initial_state(float(x)) for x in x_axis])

    finals_sa = run_protocol_batch(sa, psi).final_state
    finals_bare = run_protocol_batch(bare, psi).final_state
    p2_sa = np.abs(finals_sa[:, 2]) ** 2
    p2_bare = np.abs(finals_bare[:, 2]) ** 2
    f_sa = _gate_fidelities(finals_sa, psi)
    f_bare = _gate_fidelities(finals_bare, psi)

    # The quoted pulse area belongs to the underlying full transfer (one
    # Gaussian per leg), not to the doubled fractional envelope whose
    # integral triples it.
    base = build_schedule(replace(sa, frac=None))
    area_full = pulse_area(base.env01, base.window)
    result = SweepResult(
        kind="gate-scan",
        axes={"x": x_axis},
        values={
            "p2_sastirap": p2_sa,
            "fidelity_sastirap": f_sa,
            "p2_fstirap": p2_bare,
            "fidelity_fstirap": f_bare,
        },
        metadata={
            "units": {
                "x": "1",
                "p2_sastirap": "1",
                "fidelity_sastirap": "1",
                "p2_fstirap": "1",
                "fidelity_fstirap": "1",
            },
            "area_full_stirap": area_full,
            "mean_fidelity_sastirap": float(np.mean(f_sa)),
            "mean_fidelity_fstirap": float(np.mean(f_bare)),
            "max_population_defect": float(np.max(np.abs(p2_sa - x_axis))),
            "delta": cfg.delta,
            "eta": cfg.frac.eta,
        },
    )
    return [("gate_scan", result)]


def cmd_robustness(job: JobConfig, threads: int = 1) -> list:
    """Fluctuation response of the gate against the two-photon pi pulse.

    Produces the fidelity landscape over (drive amplitude, drive phase,
    detuning), and fluctuation-averaged fidelities of the superadiabatic
    gate and of a bare pi pulse of the same shape over a grid of amplitude
    and phase deviations. ``delta_fa`` is the gate's advantage.
    """
    validate_options(job.options, {})
    _check_axes(
        job, ("sigma_amp_rel", "sigma_phase", "amp_scale", "phase_offset", "delta")
    )
    cfg = _gate_config(job.protocol)
    sa = replace(cfg, cd_mode="two_photon", corrections="dynamical", constant_phase=None)

    amp_axis = _axis(job, "amp_scale", np.linspace(0.0, 2.0, 41))
    phase_axis = _axis(job, "phase_offset", np.linspace(-0.5 * math.pi, 0.5 * math.pi, 41))
    delta_axis = _axis(job, "delta", np.array([0.05, 0.1, 0.15]))
    landscape = fidelity_landscape(sa, amp_axis, phase_axis, delta_axis)

    sa_rel_axis = _axis(job, "sigma_amp_rel", np.linspace(0.0, 0.1, 11))
    sp_axis = _axis(job, "sigma_phase", np.array([0.0, 0.05, 0.1]))
    if np.any(sa_rel_axis < 0) or np.any(sp_axis < 0):
        raise ConfigError("axes: fluctuation deviations must be nonnegative")

    spec0 = job.fluctuation if job.fluctuation is not None else FluctuationSpec()
    spec0 = replace(spec0, seed=spec0.seed + job.seed)
    gate_runner = not_gate_runner(sa)
    pi_runner = pi_pulse_runner(sa)
    om_opt = gate_runner.optimal_amplitude

    cells = [(i, j) for i in range(sa_rel_axis.size) for j in range(sp_axis.size)]

    def cell(ij):
        i, j = ij
        spec = replace(
            spec0,
            sigma_amp=float(sa_rel_axis[i]) * om_opt,
            sigma_phase=float(sp_axis[j]),
        )
        fg = averaged_fidelity(gate_runner, spec)
        fp = averaged_fidelity(pi_runner, spec)
        return fg, fp

    shape = (sa_rel_axis.size, sp_axis.size)
    fa_gate = np.zeros(shape)
    fa_pi = np.zeros(shape)
    stderr_gate = np.zeros(shape)
    stderr_pi = np.zeros(shape)
    for (i, j), (fg, fp) in zip(cells, _thread_map(cell, cells, threads)):
        fa_gate[i, j] = fg.value
        fa_pi[i, j] = fp.value
        stderr_gate[i, j] = fg.stderr if fg.stderr is not None else 0.0
        stderr_pi[i, j] = fp.stderr if fp.stderr is not None else 0.0

    grid_values = {
        "fa_gate": fa_gate,
        "fa_pi": fa_pi,
        "delta_fa": fa_gate - fa_pi,
    }
    grid_units = {
        "sigma_amp_rel": "Omega_opt",
        "sigma_phase": "rad",
        "fa_gate": "1",
        "fa_pi": "1",
        "delta_fa": "1",
    }
    if spec0.method == "monte-carlo":
        grid_values["stderr_gate"] = stderr_gate
        grid_values["stderr_pi"] = stderr_pi
        grid_units.update(stderr_gate="1", stderr_pi="1")
    grid = SweepResult(
        kind="robustness-grid",
        axes={"sigma_amp_rel": sa_rel_axis, "sigma_phase": sp_axis},
        values=grid_values,
        metadata={
            "units": grid_units,
            "optimal_amplitude": om_opt,
            "pi_area_scale": pi_pulse_area_scale(sa),
            "method": spec0.method,
            "nodes_or_samples": spec0.nodes_or_samples,
            "delta": sa.delta,
        },
    )

    j0 = int(np.argmin(np.abs(sp_axis)))
    amp_curve = SweepResult(
        kind="robustness-amp",
        axes={"sigma_amp_rel": sa_rel_axis},
        values={
            "fa_gate": fa_gate[:, j0],
            "fa_pi": fa_pi[:, j0],
            "delta_fa": fa_gate[:, j0] - fa_pi[:, j0],
        },
        metadata={
            "units": {k: grid_units[k] for k in
                      ("sigma_amp_rel", "fa_gate", "fa_pi", "delta_fa")},
            "sigma_phase": float(sp_axis[j0]),
            "optimal_amplitude": om_opt,
        },
    )
    lmeta = dict(landscape.metadata)
    lmeta["units"] = {
        "delta": "Delta",
        "amp_scale": "Omega_opt",
        "phase_offset": "rad",
        "fidelity": "1",
    }
    landscape = SweepResult(
        kind=landscape.kind,
        axes=landscape.axes,
        values=landscape.values,
        metadata=lmeta,
    )
    return [
        ("robustness_landscape", landscape),
        ("robustness_amp", amp_curve),
        ("robustness_grid", grid),
    ]


_RUNNERS = {
    "spectroscopy-2d": cmd_spectroscopy_2d,
    "spectroscopy-amp": cmd_spectroscopy_amp,
    "transfer": cmd_transfer,
    "sweep-delta-amp": cmd_sweep_delta_amp,
    "gate-scan": cmd_gate_scan,
    "robustness": cmd_robustness,
}


def run_command(job: JobConfig, threads: int = 1) -> list:
    """Dispatch a job to its command; returns [(basename, SweepResult), ...]."""
    try:
        fn = _RUNNERS[job.command]
    except KeyError:
        raise ConfigError(f"unknown command '{job.command}'") from None
    try:
        return fn(job, threads=max(1, int(threads)))
    except (ProtocolError, PulseError, DegenerateDriveError) as exc:
        # Invalid physics requested by the configuration, not a numerical event.
        raise ConfigError(str(exc)) from exc
