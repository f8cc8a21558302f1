"""End-to-end runs (trace -> schedule -> phases -> aging -> metrics) and sweeps."""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from . import __version__
from .aging import AgingState, DeviceParams, VoltageLevel, VoltagePhase, final_aging, step_aging
from .metrics import MetricsReport, aggregate, neuron_metrics, normalize_aging
from .scheduler import (
    DestressPolicy,
    ScheduleMode,
    ScheduledTrace,
    overhead,
    schedule,
    scheduled_phases,
)
from .trace import PulseModel, SpikeTrain, WorkloadSpec, generate_poisson, load_trace, trace_hash


class InvariantViolation(RuntimeError):
    """A simulation produced output that breaks a scheduling or metric invariant."""


def check_schedule(sched: ScheduledTrace) -> None:
    orig, adj = sched.original.times, sched.adjusted.times
    if len(orig) != len(adj):
        raise InvariantViolation(f"neuron {sched.original.neuron_id}: spikes dropped")
    if np.any(adj < orig) or np.any(np.diff(adj) < 0):
        raise InvariantViolation(f"neuron {sched.original.neuron_id}: spike order or causality broken")
    w = sched.destress_events
    if len(w) and len(adj):
        idx = np.searchsorted(w[:, 0], adj, side="right") - 1
        ok = idx >= 0
        if np.any(adj[ok] < w[idx[ok], 1]):
            raise InvariantViolation(f"neuron {sched.original.neuron_id}: spike inside a destress window")


class RunError(RuntimeError):
    def __init__(self, run_id: str, cause: BaseException):
        self.run_id = run_id
        self.cause = cause
        super().__init__(f"run {run_id!r}: {cause}")


@dataclass(frozen=True)
class RunConfig:
    workload: WorkloadSpec | str
    params: DeviceParams = field(default_factory=DeviceParams)
    policy: DestressPolicy = field(default_factory=lambda: DestressPolicy(tdsi=10.0, tdsc=1.0))
    temperature: float = 300.0
    pulse: PulseModel = field(default_factory=PulseModel)
    run_id: str = "run"
    bin_width: float = 1.0
    trace_horizon: Optional[float] = None

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be > 0 K, got {self.temperature}")
        if not self.bin_width > 0:
            raise ValueError(f"bin_width must be > 0, got {self.bin_width}")
        if not isinstance(self.workload, (WorkloadSpec, str, os.PathLike)):
            raise ValueError("workload must be a WorkloadSpec or a trace path")
        if self.policy.tdsc > self.params.max_destress_ms():
            raise ValueError(
                f"tdsc={self.policy.tdsc} ms exceeds 1/nbti_recovery_rate "
                f"= {self.params.max_destress_ms()} ms"
            )

    @property
    def seed(self) -> Optional[int]:
        return self.workload.seed if isinstance(self.workload, WorkloadSpec) else None

    @property
    def workload_label(self) -> str:
        if isinstance(self.workload, WorkloadSpec):
            return self.workload.cls.value
        return os.path.basename(os.fspath(self.workload))


@dataclass(frozen=True)
class SweepConfig:
    base: RunConfig
    tdsi_values: Tuple[float, ...] = (10.0, 20.0, 30.0, 40.0, 50.0)
    temperatures: Tuple[float, ...] = (300.0, 325.0, 350.0)
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "tdsi_values", tuple(float(v) for v in self.tdsi_values))
        object.__setattr__(self, "temperatures", tuple(float(v) for v in self.temperatures))
        if not self.tdsi_values or not self.temperatures:
            raise ValueError("sweep lists must be non-empty")
        if any(v <= 0 for v in self.tdsi_values + self.temperatures):
            raise ValueError("sweep values must be positive")
        if self.base.policy.tdsc > min(self.tdsi_values):
            raise ValueError(f"tdsc={self.base.policy.tdsc} exceeds the smallest tdsi in the sweep")


@dataclass(frozen=True)
class SimReport:
    run_id: str
    workload: str
    seed: Optional[int]
    tdsi: float
    tdsc: float
    temperature: float
    summary: MetricsReport
    neurons: Dict[int, MetricsReport]
    destress_events: List[dict]
    delayed_spikes: List[dict]
    provenance: dict

    def with_summary(self, summary: MetricsReport) -> "SimReport":
        return dataclasses.replace(self, summary=summary)


class NbtiFeed:
    """NBTI-only stepping at a fixed temperature, used by threshold scheduling."""

    def __init__(self, params: DeviceParams, temperature: float):
        self.params = params
        self.temperature = temperature

    def __call__(self, nbti: float, level: VoltageLevel, duration: float) -> float:
        if duration <= 0:
            return nbti
        state = AgingState(nbti_damage=nbti)
        return step_aging(state, VoltagePhase(level, duration), self.temperature, self.params).nbti_damage


def load_workload(config: RunConfig) -> Dict[int, SpikeTrain]:
    if isinstance(config.workload, WorkloadSpec):
        return generate_poisson(config.workload)
    return load_trace(config.workload, config.trace_horizon)


def _config_echo(config: RunConfig) -> dict:
    def plain(obj):
        if dataclasses.is_dataclass(obj):
            return {f.name: plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if hasattr(obj, "value"):
            return obj.value
        if isinstance(obj, os.PathLike):
            return os.fspath(obj)
        return obj

    return plain(config)


def run(config: RunConfig, trains: Optional[Mapping[int, SpikeTrain]] = None) -> SimReport:
    """Simulate one configuration. Pass ``trains`` to reuse an already loaded workload."""
    try:
        if trains is None:
            trains = load_workload(config)
        return _run(config, trains)
    except (RunError, InvariantViolation):
        raise
    except Exception as exc:
        raise RunError(config.run_id, exc) from exc


def _run(config: RunConfig, trains: Mapping[int, SpikeTrain]) -> SimReport:
    policy = config.policy
    ovh = overhead(policy)
    feed = NbtiFeed(config.params, config.temperature) if policy.mode == ScheduleMode.THRESHOLD else None

    neurons: Dict[int, MetricsReport] = {}
    events: List[dict] = []
    delayed: List[dict] = []
    shared_windows_logged = False

    for nid in sorted(trains):
        train = trains[nid]
        sched: ScheduledTrace = schedule(train, policy, feed, config.pulse)
        check_schedule(sched)
        phases = scheduled_phases(sched, config.pulse)
        state = final_aging(phases, config.temperature, config.params)
        neurons[nid] = neuron_metrics(
            sched.original, sched.adjusted, config.bin_width, state.nbti_damage, state.tddb_damage, ovh
        )

        if policy.mode == ScheduleMode.THRESHOLD:
            events.extend(
                {"neuron_id": nid, "start_ms": float(s), "end_ms": float(e)} for s, e in sched.destress_events
            )
        elif not shared_windows_logged:
            events.extend(
                {"neuron_id": None, "start_ms": float(s), "end_ms": float(e)} for s, e in sched.destress_events
            )
            shared_windows_logged = True
        moved = np.flatnonzero(sched.adjusted.times != sched.original.times)
        delayed.extend(
            {
                "neuron_id": nid,
                "original_ms": float(sched.original.times[i]),
                "adjusted_ms": float(sched.adjusted.times[i]),
            }
            for i in moved
        )

    if not neurons:
        raise ValueError("workload contains no neurons")
    summary = aggregate([neurons[k] for k in sorted(neurons)])
    provenance = {
        "version": __version__,
        "trace_hash": trace_hash(trains),
        "config": _config_echo(config),
    }
    return SimReport(
        run_id=config.run_id,
        workload=config.workload_label,
        seed=config.seed,
        tdsi=policy.tdsi,
        tdsc=policy.tdsc,
        temperature=config.temperature,
        summary=summary,
        neurons=neurons,
        destress_events=events,
        delayed_spikes=delayed,
        provenance=provenance,
    )


def cell_id(base_id: str, tdsi: float, temperature: float) -> str:
    return f"{base_id}-tdsi{tdsi:g}-T{temperature:g}"


def sweep_cells(config: SweepConfig) -> List[RunConfig]:
    cells = []
    for temp in config.temperatures:
        for tdsi in config.tdsi_values:
            policy = dataclasses.replace(config.base.policy, tdsi=tdsi)
            cells.append(
                dataclasses.replace(
                    config.base,
                    policy=policy,
                    temperature=temp,
                    run_id=cell_id(config.base.run_id, tdsi, temp),
                )
            )
    return cells


def _run_cell(args):
    cfg, trains = args
    return run(cfg, trains)


def sweep(config: SweepConfig) -> List[SimReport]:
    """Run the tdsi x temperature grid on one shared workload realization.

    Reports come back in grid order (temperature-major) with aging normalized to
    the (smallest tdsi, lowest temperature) cell.
    """
    trains = load_workload(config.base)
    cells = sweep_cells(config)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            reports = list(pool.map(_run_cell, [(c, trains) for c in cells]))
    else:
        reports = [run(c, trains) for c in cells]

    baseline = cell_id(config.base.run_id, min(config.tdsi_values), min(config.temperatures))
    normed = normalize_aging({r.run_id: r.summary for r in reports}, baseline)
    return [r.with_summary(normed[r.run_id]) for r in reports]
