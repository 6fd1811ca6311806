"""Job configurations and deterministic result files.

A job is a JSON document naming a command, the protocol parameters, the
sweep axes, and any fluctuation model. Validation is strict: unknown fields
are rejected and every violation names the offending field, because a silent
default in a physics sweep wastes hours of computation before anyone reads
the numbers.

Results are uniform: every command produces one or more ``SweepResult``
grids (a 1-d trajectory is a grid over the time axis), written as a CSV
with a header row, UTF-8, '.' decimals, row-major cell order, and columns
labeled with their units (rates in Delta, times in 1/Delta). A JSON sidecar
records the axes, the code version, the configuration hash, and the wall
time. Given the same configuration and seed the CSV bytes are identical
run to run; the sidecar's wall time is the one intentional exception.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields as dataclass_fields
from pathlib import Path

import numpy as np

from .protocols import ProtocolConfig, ProtocolError
from .pulses import FractionalParams, PulseError
from .model import QutritParams

__all__ = [
    "CODE_VERSION",
    "COMMANDS",
    "ConfigError",
    "ResultError",
    "JobConfig",
    "SweepResult",
    "load_config",
    "parse_config",
    "job_to_dict",
    "config_hash",
    "write_result",
    "validate_options",
]

CODE_VERSION = "0.1.0"

COMMANDS = (
    "spectroscopy-2d",
    "spectroscopy-amp",
    "transfer",
    "sweep-delta-amp",
    "gate-scan",
    "robustness",
)


class ConfigError(ValueError):
    """A job configuration is malformed; the message names the field."""


class ResultError(RuntimeError):
    """A computed result violates its own invariants (non-finite cells)."""


# -- result container ---------------------------------------------------------


@dataclass(frozen=True)
class SweepResult:
    """A named bundle of observable grids over shared sweep axes.

    ``axes`` maps axis names to their 1-d coordinate arrays in sweep order;
    every array in ``values`` has shape ``(len(axis) for axis in axes)``.
    ``metadata`` may carry a ``units`` mapping (column name -> unit string)
    used for CSV headers, plus anything the command wants to report.
    """

    kind: str
    axes: dict
    values: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.axes or not self.values:
            raise ValueError("a sweep result needs at least one axis and one grid")
        shape = tuple(len(np.asarray(v)) for v in self.axes.values())
        for name, grid in self.values.items():
            got = np.shape(grid)
            if got != shape:
                raise ValueError(
                    f"grid {name!r} has shape {got}, expected {shape} from the axes"
                )
            if not np.all(np.isfinite(grid)):
                raise ResultError(
                    f"grid {name!r} contains non-finite cells; the computation "
                    "did not converge"
                )


# -- job configuration --------------------------------------------------------


@dataclass(frozen=True)
class JobConfig:
    """A validated job: command, protocol, axes, fluctuation model, options."""

    command: str
    protocol: ProtocolConfig
    axes: dict
    fluctuation: object | None
    options: dict
    output: str | None
    seed: int


_TOP_LEVEL = ("command", "protocol", "axes", "fluctuation", "options", "output", "seed")

# Scalar ProtocolConfig fields settable from JSON, plus the qutrit coupling
# ratio ``lam`` and the fractional-sequence keys ``eta``/``tau``.
_PROTOCOL_NUMBERS = (
    "omega01_peak",
    "omega12_peak",
    "sigma",
    "t_s",
    "delta",
    "delta02",
    "window_pad",
    "rel_tol",
    "abs_tol",
    "samples_per_sigma",
    "cd_floor",
    "constant_phase",
)
_PROTOCOL_STRINGS = ("cd_mode", "corrections", "backend")
_PROTOCOL_EXTRA = ("lam", "eta", "tau")


def _require_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    if not math.isfinite(float(value)):
        raise ConfigError(f"{where} must be finite, got {value!r}")
    return float(value)


def _require_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where} must be an integer, got {value!r}")
    return int(value)


def _require_str(value, where: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{where} must be a string, got {value!r}")
    return value


def _require_mapping(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be an object, got {value!r}")
    return value


def _parse_protocol(raw: dict) -> ProtocolConfig:
    raw = _require_mapping(raw, "protocol")
    allowed = set(_PROTOCOL_NUMBERS) | set(_PROTOCOL_STRINGS) | set(_PROTOCOL_EXTRA)
    for key in raw:
        if key not in allowed:
            raise ConfigError(
                f"protocol: unknown field '{key}' (allowed: {sorted(allowed)})"
            )
    kwargs = {}
    for key in _PROTOCOL_NUMBERS:
        if key in raw:
            kwargs[key] = _require_number(raw[key], f"protocol.{key}")
    for key in _PROTOCOL_STRINGS:
        if key in raw:
            kwargs[key] = _require_str(raw[key], f"protocol.{key}")
    if "lam" in raw:
        lam = _require_number(raw["lam"], "protocol.lam")
        try:
            kwargs["qutrit"] = QutritParams(lam=lam)
        except ValueError as exc:
            raise ConfigError(f"protocol.lam: {exc}") from exc
    if "eta" in raw or "tau" in raw:
        frac_kwargs = {}
        if "eta" in raw:
            frac_kwargs["eta"] = _require_number(raw["eta"], "protocol.eta")
        if "tau" in raw:
            frac_kwargs["tau"] = _require_number(raw["tau"], "protocol.tau")
        try:
            kwargs["frac"] = FractionalParams(**frac_kwargs)
        except PulseError as exc:
            raise ConfigError(f"protocol fractional sequence: {exc}") from exc
    try:
        return ProtocolConfig(**kwargs)
    except (ProtocolError, ValueError) as exc:
        raise ConfigError(f"protocol: {exc}") from exc


def _parse_axes(raw) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, list):
        raise ConfigError("axes must be a list of axis objects")
    axes: dict = {}
    for i, entry in enumerate(raw):
        where = f"axes[{i}]"
        entry = _require_mapping(entry, where)
        for key in entry:
            if key not in ("name", "start", "stop", "count"):
                raise ConfigError(f"{where}: unknown field '{key}'")
        for key in ("name", "start", "stop", "count"):
            if key not in entry:
                raise ConfigError(f"{where}: missing required field '{key}'")
        name = _require_str(entry["name"], f"{where}.name")
        if name in axes:
            raise ConfigError(f"{where}: duplicate axis name '{name}'")
        start = _require_number(entry["start"], f"{where}.start")
        stop = _require_number(entry["stop"], f"{where}.stop")
        count = _require_int(entry["count"], f"{where}.count")
        if count < 1:
            raise ConfigError(f"{where}.count must be >= 1, got {count}")
        axes[name] = np.linspace(start, stop, count)
    return axes


def _parse_fluctuation(raw):
    if raw is None:
        return None
    from .robustness import FluctuationSpec

    raw = _require_mapping(raw, "fluctuation")
    allowed = ("sigma_amp", "sigma_phase", "method", "nodes_or_samples", "seed")
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"fluctuation: unknown field '{key}'")
    kwargs = {}
    for key in ("sigma_amp", "sigma_phase"):
        if key in raw:
            kwargs[key] = _require_number(raw[key], f"fluctuation.{key}")
    if "method" in raw:
        kwargs["method"] = _require_str(raw["method"], "fluctuation.method")
    for key in ("nodes_or_samples", "seed"):
        if key in raw:
            kwargs[key] = _require_int(raw[key], f"fluctuation.{key}")
    try:
        return FluctuationSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"fluctuation: {exc}") from exc


def parse_config(raw: dict, source: str = "<config>") -> JobConfig:
    """Validate a decoded JSON job object; every error names its field."""
    raw = _require_mapping(raw, source)
    for key in raw:
        if key not in _TOP_LEVEL:
            raise ConfigError(f"unknown field '{key}' (allowed: {list(_TOP_LEVEL)})")
    if "command" not in raw:
        raise ConfigError("missing required field 'command'")
    command = _require_str(raw["command"], "command")
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {list(COMMANDS)}, got '{command}'")
    protocol = _parse_protocol(raw.get("protocol", {}))
    axes = _parse_axes(raw.get("axes"))
    fluctuation = _parse_fluctuation(raw.get("fluctuation"))
    options = _require_mapping(raw.get("options", {}), "options")
    output = None
    if raw.get("output") is not None:
        output = _require_str(raw["output"], "output")
    seed = _require_int(raw.get("seed", 0), "seed")
    return JobConfig(
        command=command,
        protocol=protocol,
        axes=axes,
        fluctuation=fluctuation,
        options=dict(options),
        output=output,
        seed=seed,
    )


def load_config(path) -> JobConfig:
    """Read and validate a JSON job file."""
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p} is not valid JSON: {exc}") from exc
    return parse_config(raw, source=str(p))


def validate_options(options: dict, schema: dict, where: str = "options") -> dict:
    """Check command options against ``{name: (checker, default)}``.

    ``checker(value, where)`` returns the coerced value or raises
    ``ConfigError``. Unknown option names are rejected; the returned dict
    carries every schema entry, defaults filled in.
    """
    for key in options:
        if key not in schema:
            raise ConfigError(
                f"{where}: unknown option '{key}' (allowed: {sorted(schema)})"
            )
    out = {}
    for key, (checker, default) in schema.items():
        if key in options:
            out[key] = checker(options[key], f"{where}.{key}")
        else:
            out[key] = default
    return out


# -- canonical form and hashing ----------------------------------------------


def job_to_dict(job: JobConfig) -> dict:
    """Fully-resolved canonical form of a job (defaults included)."""
    proto = {}
    for f in dataclass_fields(ProtocolConfig):
        value = getattr(job.protocol, f.name)
        if f.name == "qutrit":
            proto["lam"] = value.lam
        elif f.name == "frac":
            if value is not None:
                proto["eta"] = value.eta
                if value.tau is not None:
                    proto["tau"] = value.tau
        elif value is not None:
            # unset optionals (delta02, constant_phase) stay absent so the
            # canonical form parses back to the same configuration
            proto[f.name] = value
    axes = [
        {
            "name": name,
            "start": float(vals[0]),
            "stop": float(vals[-1]),
            "count": int(len(vals)),
        }
        for name, vals in job.axes.items()
    ]
    out = {
        "command": job.command,
        "protocol": proto,
        "axes": axes,
        "options": job.options,
        "output": job.output,
        "seed": job.seed,
    }
    if job.fluctuation is not None:
        fl = job.fluctuation
        out["fluctuation"] = {
            "sigma_amp": fl.sigma_amp,
            "sigma_phase": fl.sigma_phase,
            "method": fl.method,
            "nodes_or_samples": fl.nodes_or_samples,
            "seed": fl.seed,
        }
    return out


def config_hash(job: JobConfig) -> str:
    """Short stable digest of the fully-resolved configuration."""
    canon = json.dumps(job_to_dict(job), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


# -- output files --------------------------------------------------------------


def _json_safe(value):
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_json_safe(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def _format_cell(x) -> str:
    if isinstance(x, (np.floating, float)):
        return repr(float(x))
    return str(x)


def write_result(
    result: SweepResult,
    directory,
    basename: str,
    *,
    job: JobConfig | None = None,
    wall_time: float | None = None,
) -> tuple[Path, Path]:
    """Write ``<basename>.csv`` and ``<basename>.meta.json``; returns both paths.

    The CSV holds one row per grid cell in row-major axis order, axis
    columns first, observable columns after, every column labeled with its
    unit from ``result.metadata['units']`` (default '1'). Bytes are
    deterministic for a fixed result.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    units = result.metadata.get("units", {})
    axis_names = list(result.axes)
    value_names = list(result.values)
    header = [f"{n} [{units.get(n, '1')}]" for n in axis_names + value_names]

    axis_arrays = [np.asarray(result.axes[n]) for n in axis_names]
    grids = [np.asarray(result.values[n]) for n in value_names]
    shape = tuple(len(a) for a in axis_arrays)

    lines = [",".join(header)]
    for idx in np.ndindex(shape):
        row = [_format_cell(axis_arrays[d][i]) for d, i in enumerate(idx)]
        row += [_format_cell(g[idx]) for g in grids]
        lines.append(",".join(row))
    csv_path = directory / f"{basename}.csv"
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")

    meta = {
        "kind": result.kind,
        "code_version": CODE_VERSION,
        "config_hash": config_hash(job) if job is not None else None,
        "wall_time_s": wall_time,
        "axes": [
            {
                "name": n,
                "count": int(len(a)),
                "min": float(np.min(a)),
                "max": float(np.max(a)),
            }
            for n, a in zip(axis_names, axis_arrays)
        ],
        "values": value_names,
        "metadata": _json_safe(
            {k: v for k, v in result.metadata.items() if k != "units"}
        ),
        "units": _json_safe(units),
    }
    meta_path = directory / f"{basename}.meta.json"
    meta_path.write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return csv_path, meta_path
