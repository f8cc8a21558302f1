"""
Flat ``key = value`` configuration with dotted keys.

Resolution order is defaults < config file < command-line overrides. Lines
starting with ``#`` and blank lines are ignored; list values are comma-separated.
"""

from __future__ import annotations

import dataclasses
import os
from typing import Any, Callable, Dict, Iterable, Mapping, Optional, Tuple

from .aging import DeviceParams
from .harness import RunConfig, SweepConfig
from .scheduler import ConfigError, DestressPolicy
from .trace import PulseModel, WorkloadSpec


def _optional_float(text: str) -> Optional[float]:
    text = text.strip()
    if text.lower() in ("", "none", "auto"):
        return None
    return float(text)


def _float_list(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    return value


_DEVICE_DEFAULTS = DeviceParams()

# key -> (parser, default)
SCHEMA: Dict[str, Tuple[Callable[[str], Any], Any]] = {
    "workload.class": (str, "sparse"),
    "workload.rate": (_optional_float, None),
    "workload.neurons": (int, 100),
    "workload.horizon_ms": (float, 1200.0),
    "workload.seed": (_u64, 0),
    "workload.trace": (str, ""),
    "policy.mode": (str, "periodic"),
    "policy.tdsi_ms": (float, 10.0),
    "policy.tdsc_ms": (float, 1.0),
    "policy.aging_cap": (_optional_float, None),
    "policy.phase_offset_ms": (float, 0.0),
    "run.id": (str, "run"),
    "run.temperature_K": (float, 300.0),
    "pulse.width_ms": (float, 0.2),
    "metrics.bin_ms": (float, 1.0),
    "sweep.tdsi_ms": (_float_list, (10.0, 20.0, 30.0, 40.0, 50.0)),
    "sweep.temperatures_K": (_float_list, (300.0, 325.0, 350.0)),
    "sweep.workers": (int, 1),
}
for _f in dataclasses.fields(DeviceParams):
    SCHEMA[f"device.{_f.name}"] = (float, getattr(_DEVICE_DEFAULTS, _f.name))


def _check_key(key: str) -> None:
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}; valid keys: {', '.join(sorted(SCHEMA))}")


def parse_text(text: str, source: str = "<config>") -> Dict[str, str]:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        _check_key(key)
        raw[key] = value
    return raw


def parse_override(item: str) -> Tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"override must be key=value, got {item!r}")
    key, value = (part.strip() for part in item.split("=", 1))
    _check_key(key)
    return key, value


def resolve(
    config_path: Optional[str | os.PathLike] = None,
    overrides: Iterable[Tuple[str, str]] | Mapping[str, str] = (),
) -> Dict[str, Any]:
    """Typed values for every key after applying file and override layers."""
    raw: Dict[str, str] = {}
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                raw.update(parse_text(fh.read(), os.fspath(config_path)))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
    if isinstance(overrides, Mapping):
        overrides = overrides.items()
    for key, value in overrides:
        _check_key(key)
        raw[key] = value

    values = {key: default for key, (_, default) in SCHEMA.items()}
    for key, text in raw.items():
        parser = SCHEMA[key][0]
        try:
            values[key] = parser(text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None
    return values


def workload_spec(values: Mapping[str, Any]) -> WorkloadSpec:
    try:
        return WorkloadSpec(
            cls=values["workload.class"],
            rate=values["workload.rate"],
            num_neurons=values["workload.neurons"],
            horizon=values["workload.horizon_ms"],
            seed=values["workload.seed"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def run_config(values: Mapping[str, Any]) -> RunConfig:
    try:
        device = DeviceParams(
            **{f.name: values[f"device.{f.name}"] for f in dataclasses.fields(DeviceParams)}
        )
        policy = DestressPolicy(
            tdsi=values["policy.tdsi_ms"],
            tdsc=values["policy.tdsc_ms"],
            mode=values["policy.mode"],
            aging_cap=values["policy.aging_cap"],
            phase_offset=values["policy.phase_offset_ms"],
        )
        trace = values["workload.trace"]
        workload = trace if trace else workload_spec(values)
        return RunConfig(
            workload=workload,
            params=device,
            policy=policy,
            temperature=values["run.temperature_K"],
            pulse=PulseModel(values["pulse.width_ms"]),
            run_id=values["run.id"],
            bin_width=values["metrics.bin_ms"],
            trace_horizon=values["workload.horizon_ms"] if trace else None,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def sweep_config(values: Mapping[str, Any]) -> SweepConfig:
    base = run_config(values)
    try:
        return SweepConfig(
            base=base,
            tdsi_values=values["sweep.tdsi_ms"],
            temperatures=values["sweep.temperatures_K"],
            workers=values["sweep.workers"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
