"""
NBTI / TDDB lifetime models and damage accumulation for a neuron's CMOS devices.

Damage is accumulated as consumed lifetime fraction (Miner's rule): a phase of
duration d at voltage V adds d / MTTF(V, T), multiplied by ``unit_scale`` to land
in presentation-friendly "aging units".

NBTI has two recovery paths:

* Destress (sub-threshold) phases remove a fixed fraction of accumulated damage
  per ms: ``x <- x * (1 - r * d)``.
* Idle phases still stress the device at ``v_idle`` but also relax it
  proportionally; the linear ODE ``dx/dt = a - rho * x`` is integrated exactly,
  so splitting an idle phase never changes the result.

TDDB never recovers and keeps accruing at every voltage, including sub-threshold.

All times are milliseconds, all MTTF values are milliseconds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Sequence

import numpy as np

BOLTZMANN_EV = 8.617333e-5


class VoltageLevel(enum.IntEnum):
    READ = 0
    IDLE = 1
    DESTRESS = 2


@dataclass(frozen=True)
class DeviceParams:
    nbti_A: float = 1.0e5
    nbti_gamma: float = 4.0
    nbti_Ea: float = 0.0357
    boltzmann_K: float = BOLTZMANN_EV
    tddb_A: float = 1.0e8
    tddb_gamma: float = 3.0
    v_read: float = 1.8
    v_idle: float = 1.2
    v_th: float = 0.45
    nbti_recovery_rate: float = 0.25
    nbti_idle_recovery_rate: float = 0.05
    subthreshold_fraction: float = 0.3
    unit_scale: float = 1.0e6

    def __post_init__(self):
        problems = []
        for name in ("nbti_A", "tddb_A", "nbti_gamma", "tddb_gamma", "unit_scale", "boltzmann_K"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0")
        if not self.nbti_Ea >= 0:
            problems.append("nbti_Ea must be >= 0")
        if not (0 < self.v_th < self.v_idle < self.v_read):
            problems.append("voltages must satisfy 0 < v_th < v_idle < v_read")
        if not (0 <= self.nbti_recovery_rate and 0 <= self.nbti_idle_recovery_rate):
            problems.append("recovery rates must be >= 0")
        if not (0 < self.subthreshold_fraction < 1):
            problems.append("subthreshold_fraction must be in (0, 1)")
        if problems:
            raise ValueError("invalid DeviceParams: " + "; ".join(problems))

    @property
    def v_sub(self) -> float:
        """Gate voltage held during a destress window (below ``v_th``)."""
        return self.subthreshold_fraction * self.v_th

    def voltage(self, level: VoltageLevel) -> float:
        if level == VoltageLevel.READ:
            return self.v_read
        if level == VoltageLevel.IDLE:
            return self.v_idle
        return self.v_sub

    def max_destress_ms(self) -> float:
        """Longest destress phase for which proportional recovery stays >= 0."""
        if self.nbti_recovery_rate == 0:
            return math.inf
        return 1.0 / self.nbti_recovery_rate

    def with_(self, **changes) -> "DeviceParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class AgingState:
    nbti_damage: float = 0.0
    tddb_damage: float = 0.0
    clock: float = 0.0


@dataclass(frozen=True)
class VoltagePhase:
    level: VoltageLevel
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"phase duration must be > 0, got {self.duration}")
        object.__setattr__(self, "level", VoltageLevel(self.level))


def mttf_nbti(v: float, temp: float, params: DeviceParams) -> float:
    """NBTI mean time to failure, ``A / V**gamma * exp(Ea / (K T))``."""
    if not v > 0:
        raise ValueError(f"NBTI voltage must be > 0, got {v}")
    if not temp > 0:
        raise ValueError(f"temperature must be > 0 K, got {temp}")
    return params.nbti_A / v**params.nbti_gamma * math.exp(
        params.nbti_Ea / (params.boltzmann_K * temp)
    )


def mttf_tddb(v: float, params: DeviceParams) -> float:
    """TDDB mean time to failure, ``A * exp(-gamma * sqrt(V))``."""
    if not v >= 0:
        raise ValueError(f"TDDB voltage must be >= 0, got {v}")
    return params.tddb_A * math.exp(-params.tddb_gamma * math.sqrt(v))


def _nbti_rate(level: VoltageLevel, temp: float, params: DeviceParams) -> float:
    return params.unit_scale / mttf_nbti(params.voltage(level), temp, params)


def _tddb_rate(level: VoltageLevel, params: DeviceParams) -> float:
    return params.unit_scale / mttf_tddb(params.voltage(level), params)


def step_aging(
    state: AgingState, phase: VoltagePhase, temp: float, params: DeviceParams
) -> AgingState:
    d = phase.duration
    tddb = state.tddb_damage + d * _tddb_rate(phase.level, params)

    if phase.level == VoltageLevel.DESTRESS:
        keep = 1.0 - params.nbti_recovery_rate * d
        if keep < 0:
            raise ValueError(
                f"destress phase of {d} ms exceeds 1/nbti_recovery_rate "
                f"({params.max_destress_ms()} ms)"
            )
        nbti = state.nbti_damage * keep
    else:
        rate = _nbti_rate(phase.level, temp, params)
        rho = params.nbti_idle_recovery_rate if phase.level == VoltageLevel.IDLE else 0.0
        if rho > 0:
            decay = math.exp(-rho * d)
            nbti = state.nbti_damage * decay + (rate / rho) * -math.expm1(-rho * d)
        else:
            nbti = state.nbti_damage + d * rate

    return AgingState(nbti_damage=nbti, tddb_damage=tddb, clock=state.clock + d)


def aging_trajectory(
    phases: Iterable[VoltagePhase],
    temp: float,
    params: DeviceParams,
    initial: AgingState | None = None,
) -> List[AgingState]:
    """State after each phase, in order. An empty input gives an empty list."""
    state = initial or AgingState()
    out = []
    for phase in phases:
        state = step_aging(state, phase, temp, params)
        out.append(state)
    return out


@dataclass(frozen=True)
class PhaseArrays:
    """Column form of a phase sequence, used by the simulation fast path."""

    levels: np.ndarray  # int8, VoltageLevel values
    durations: np.ndarray  # float64, ms
    starts: np.ndarray = field(default=None)  # float64, ms

    def __len__(self):
        return len(self.levels)

    def to_phases(self) -> List[VoltagePhase]:
        return [
            VoltagePhase(VoltageLevel(int(lv)), float(d))
            for lv, d in zip(self.levels, self.durations)
        ]

    @classmethod
    def from_phases(cls, phases: Sequence[VoltagePhase]) -> "PhaseArrays":
        levels = np.array([int(p.level) for p in phases], dtype=np.int8)
        durations = np.array([p.duration for p in phases], dtype=np.float64)
        starts = np.concatenate([[0.0], np.cumsum(durations)[:-1]]) if len(phases) else np.zeros(0)
        return cls(levels, durations, starts)

    def total(self, level: VoltageLevel | None = None) -> float:
        if level is None:
            return float(self.durations.sum())
        return float(self.durations[self.levels == level].sum())


def final_aging(
    phases: PhaseArrays,
    temp: float,
    params: DeviceParams,
    initial: AgingState | None = None,
) -> AgingState:
    """Same result as the last element of :func:`aging_trajectory`, vectorised.

    Every phase acts on NBTI damage as an affine map ``x -> alpha * x + beta``;
    the composition is evaluated with suffix products of ``alpha``.
    """
    initial = initial or AgingState()
    levels = phases.levels
    d = phases.durations
    if len(d) == 0:
        return initial
    if np.any(d <= 0):
        raise ValueError("phase durations must be > 0")

    tddb_rates = np.array([_tddb_rate(lv, params) for lv in VoltageLevel])
    nbti_rates = np.array(
        [_nbti_rate(VoltageLevel.READ, temp, params), _nbti_rate(VoltageLevel.IDLE, temp, params), 0.0]
    )
    tddb = initial.tddb_damage + float(np.sum(d * tddb_rates[levels]))

    alpha = np.ones_like(d)
    beta = np.zeros_like(d)
    is_read = levels == VoltageLevel.READ
    is_idle = levels == VoltageLevel.IDLE
    is_dst = levels == VoltageLevel.DESTRESS

    beta[is_read] = d[is_read] * nbti_rates[VoltageLevel.READ]
    rho = params.nbti_idle_recovery_rate
    if rho > 0:
        alpha[is_idle] = np.exp(-rho * d[is_idle])
        beta[is_idle] = nbti_rates[VoltageLevel.IDLE] / rho * -np.expm1(-rho * d[is_idle])
    else:
        beta[is_idle] = d[is_idle] * nbti_rates[VoltageLevel.IDLE]
    keep = 1.0 - params.nbti_recovery_rate * d[is_dst]
    if np.any(keep < 0):
        raise ValueError(
            f"destress phase exceeds 1/nbti_recovery_rate ({params.max_destress_ms()} ms)"
        )
    alpha[is_dst] = keep

    # suffix[i] = prod(alpha[i+1:])
    suffix = np.empty_like(alpha)
    suffix[-1] = 1.0
    if len(alpha) > 1:
        suffix[:-1] = np.cumprod(alpha[:0:-1])[::-1]
    nbti = initial.nbti_damage * suffix[0] * alpha[0] + float(np.dot(beta, suffix))

    return AgingState(nbti_damage=nbti, tddb_damage=tddb, clock=initial.clock + float(d.sum()))
