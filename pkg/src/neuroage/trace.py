"""Spike trains: CSV I/O, synthetic workloads, and conversion to voltage phases."""

from __future__ import annotations

import enum
import hashlib
import io
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from .aging import PhaseArrays, VoltageLevel, VoltagePhase


class TraceError(ValueError):
    """Malformed or invalid spike data."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True, eq=False)
class SpikeTrain:
    """Spike times (ms) of one neuron over ``[0, horizon]``.

    Trains built from files or the generator are strictly increasing. Trains
    produced by the scheduler may hold coincident times (several spikes released
    at the end of one destress window); pass ``strict=False`` for those.
    """

    neuron_id: int
    times: np.ndarray
    horizon: float
    strict: bool = True

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "times", times)
        times.setflags(write=False)
        if self.neuron_id < 0:
            raise TraceError(f"neuron_id must be >= 0, got {self.neuron_id}")
        if not self.horizon > 0:
            raise TraceError(f"horizon must be > 0, got {self.horizon}")
        if times.ndim != 1:
            raise TraceError("spike times must be one-dimensional")
        if len(times):
            steps = np.diff(times)
            if self.strict and np.any(steps <= 0):
                raise TraceError(f"neuron {self.neuron_id}: spike times not strictly increasing")
            if np.any(steps < 0):
                raise TraceError(f"neuron {self.neuron_id}: spike times out of order")
            if times[0] < 0 or times[-1] > self.horizon:
                raise TraceError(f"neuron {self.neuron_id}: spike time outside [0, {self.horizon}]")

    def __len__(self):
        return len(self.times)

    def __eq__(self, other):
        if not isinstance(other, SpikeTrain):
            return NotImplemented
        return (
            self.neuron_id == other.neuron_id
            and self.horizon == other.horizon
            and np.array_equal(self.times, other.times)
        )

    def __hash__(self):
        return hash((self.neuron_id, self.horizon, self.times.tobytes()))


class WorkloadClass(str, enum.Enum):
    SPARSE = "sparse"
    DENSE = "dense"
    BURSTY = "bursty"


# Calibrated firing rates (spikes/ms); see calibration.calibrate_class_rates.
DEFAULT_CLASS_RATES = {
    WorkloadClass.SPARSE: 0.02,
    WorkloadClass.DENSE: 10.0,
    WorkloadClass.BURSTY: 0.5,
}

# On/off modulation for the bursty class: mean state durations in ms.
BURST_ON_MS = 20.0
BURST_OFF_MS = 80.0


@dataclass(frozen=True)
class WorkloadSpec:
    cls: WorkloadClass = WorkloadClass.SPARSE
    rate: float | None = None
    num_neurons: int = 100
    horizon: float = 1200.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cls", WorkloadClass(self.cls))
        if self.rate is None:
            object.__setattr__(self, "rate", DEFAULT_CLASS_RATES[self.cls])
        if not self.rate > 0:
            raise ValueError(f"workload rate must be > 0, got {self.rate}")
        if self.num_neurons < 1:
            raise ValueError(f"num_neurons must be >= 1, got {self.num_neurons}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class PulseModel:
    pulse_width: float = 0.2

    def __post_init__(self):
        if not self.pulse_width > 0:
            raise ValueError(f"pulse_width must be > 0, got {self.pulse_width}")


# --- file I/O ---------------------------------------------------------------


def parse_trace(text: str, horizon: float | None = None) -> Dict[int, SpikeTrain]:
    rows: Dict[int, List[float]] = {}
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise TraceError(f"expected 'neuron_id,time_ms', got {line!r}", lineno)
        try:
            nid = int(parts[0])
            t = float(parts[1])
        except ValueError:
            raise TraceError(f"cannot parse {line!r}", lineno) from None
        if nid < 0 or not np.isfinite(t) or t < 0:
            raise TraceError(f"invalid neuron id or time in {line!r}", lineno)
        rows.setdefault(nid, []).append(t)

    if not rows:
        return {}
    latest = max(max(ts) for ts in rows.values())
    if horizon is None:
        horizon = float(np.ceil(latest)) or 1.0
    elif latest > horizon:
        raise TraceError(f"spike at {latest} ms beyond horizon {horizon} ms")

    trains = {}
    for nid in sorted(rows):
        times = np.sort(np.array(rows[nid]))
        if np.any(np.diff(times) == 0):
            raise TraceError(f"neuron {nid}: duplicate spike timestamps")
        trains[nid] = SpikeTrain(nid, times, horizon)
    return trains


def load_trace(path: str | os.PathLike, horizon: float | None = None) -> Dict[int, SpikeTrain]:
    """Read a ``neuron_id,time_ms`` CSV into trains keyed by neuron id.

    Without an explicit ``horizon`` the latest spike, rounded up to a whole ms,
    is used.
    """
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh.read(), horizon)


def format_trace(trains: Iterable[SpikeTrain]) -> str:
    buf = io.StringIO()
    for train in sorted(trains, key=lambda tr: tr.neuron_id):
        for t in train.times:
            buf.write(f"{train.neuron_id},{float(t)!r}\n")
    return buf.getvalue()


def save_trace(trains: Iterable[SpikeTrain], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_trace(trains))


def trace_hash(trains: Mapping[int, SpikeTrain] | Iterable[SpikeTrain]) -> str:
    if isinstance(trains, Mapping):
        trains = trains.values()
    h = hashlib.sha256()
    for train in sorted(trains, key=lambda tr: tr.neuron_id):
        h.update(np.int64(train.neuron_id).tobytes())
        h.update(np.float64(train.horizon).tobytes())
        h.update(train.times.tobytes())
    return h.hexdigest()


# --- synthetic workloads ------------------------------------------------------


def _poisson_times(rng: np.random.Generator, rate: float, start: float, stop: float) -> np.ndarray:
    n = rng.poisson(rate * (stop - start))
    return np.sort(rng.uniform(start, stop, size=n))


def _burst_windows(rng: np.random.Generator, horizon: float) -> List[Tuple[float, float]]:
    windows = []
    t = 0.0
    on = rng.random() < BURST_ON_MS / (BURST_ON_MS + BURST_OFF_MS)
    while t < horizon:
        length = rng.exponential(BURST_ON_MS if on else BURST_OFF_MS)
        if on:
            windows.append((t, min(t + length, horizon)))
        t += length
        on = not on
    return windows


def generate_poisson(spec: WorkloadSpec) -> Dict[int, SpikeTrain]:
    """Independent Poisson trains, one per neuron, deterministic in ``spec.seed``.

    The bursty class gates each neuron with its own two-state on/off process and
    scales the on-state rate so the long-run mean stays at ``spec.rate``.
    """
    root = np.random.SeedSequence(spec.seed)
    trains = {}
    duty = BURST_ON_MS / (BURST_ON_MS + BURST_OFF_MS)
    for nid, child in enumerate(root.spawn(spec.num_neurons)):
        rng = np.random.default_rng(child)
        if spec.cls == WorkloadClass.BURSTY:
            parts = [
                _poisson_times(rng, spec.rate / duty, a, b) for a, b in _burst_windows(rng, spec.horizon)
            ]
            times = np.concatenate(parts) if parts else np.zeros(0)
        else:
            times = _poisson_times(rng, spec.rate, 0.0, spec.horizon)
        # continuous draws tie with probability ~0, but keep the strict contract
        times = np.unique(times)
        trains[nid] = SpikeTrain(nid, times, spec.horizon)
    return trains


# --- voltage phases -----------------------------------------------------------


def pulse_union(times: np.ndarray, width: float) -> Tuple[np.ndarray, np.ndarray]:
    """Merge per-spike intervals ``[t, t + width]`` into disjoint (starts, ends)."""
    times = np.asarray(times, dtype=np.float64)
    if len(times) == 0:
        return np.zeros(0), np.zeros(0)
    ends = times + width
    # a new interval begins where a spike starts after the previous pulse ended;
    # ends are sorted because all pulses share one width
    new = np.empty(len(times), dtype=bool)
    new[0] = True
    new[1:] = times[1:] > ends[:-1]
    first = np.flatnonzero(new)
    last = np.append(first[1:] - 1, len(times) - 1)
    return times[first], ends[last]


def _inside(points: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Membership of each point in a union of sorted, disjoint ``[start, end)``."""
    if len(starts) == 0:
        return np.zeros(len(points), dtype=bool)
    idx = np.searchsorted(starts, points, side="right") - 1
    ok = idx >= 0
    out = np.zeros(len(points), dtype=bool)
    out[ok] = points[ok] < ends[idx[ok]]
    return out


def build_phases(
    times: np.ndarray,
    horizon: float,
    pulse: PulseModel,
    windows: Sequence[Tuple[float, float]] | np.ndarray = (),
) -> PhaseArrays:
    """Partition ``[0, horizon]`` into Read / Idle / Destress phases.

    Read covers the union of spike pulses; destress windows take precedence over
    any pulse they overlap; everything else is Idle. Adjacent phases of the same
    level are merged and all phases have positive duration.
    """
    r_start, r_end = pulse_union(times, pulse.pulse_width)
    w = np.asarray(windows, dtype=np.float64).reshape(-1, 2)
    w_start, w_end = w[:, 0], w[:, 1]

    cuts = np.concatenate([[0.0, horizon], r_start, r_end, w_start, w_end])
    cuts = np.unique(np.clip(cuts, 0.0, horizon))
    lo, hi = cuts[:-1], cuts[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    mid = 0.5 * (lo + hi)

    levels = np.full(len(mid), VoltageLevel.IDLE, dtype=np.int8)
    levels[_inside(mid, r_start, r_end)] = VoltageLevel.READ
    levels[_inside(mid, w_start, w_end)] = VoltageLevel.DESTRESS

    change = np.ones(len(levels), dtype=bool)
    change[1:] = levels[1:] != levels[:-1]
    starts = lo[change]
    stops = np.append(starts[1:], hi[-1]) if len(starts) else starts
    return PhaseArrays(levels[change], stops - starts, starts)


def to_voltage_phases(train: SpikeTrain, pulse: PulseModel | None = None) -> List[VoltagePhase]:
    pulse = pulse or PulseModel()
    return build_phases(train.times, train.horizon, pulse).to_phases()
