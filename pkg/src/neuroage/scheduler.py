"""
Stop-and-go destress scheduling.

Every ``tdsi`` ms the neuron is driven sub-threshold for ``tdsc`` ms. A spike that
would fire inside a window ``[start, end)`` is held and released at the first
instant outside all windows (its window's end unless windows touch); spikes are
never dropped and keep their relative order.

In threshold mode a window additionally opens as soon as the neuron's NBTI damage
would rise above ``aging_cap``; the ``tdsi`` timer restarts from every window.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .aging import PhaseArrays, VoltageLevel, VoltagePhase
from .trace import PulseModel, SpikeTrain, build_phases

# (nbti_before, level, duration_ms) -> nbti_after
AgingFeed = Callable[[float, VoltageLevel, float], float]


class ConfigError(ValueError):
    pass


class ScheduleMode(str, enum.Enum):
    PERIODIC = "periodic"
    THRESHOLD = "threshold"


@dataclass(frozen=True)
class DestressPolicy:
    tdsi: float
    tdsc: float
    mode: ScheduleMode = ScheduleMode.PERIODIC
    aging_cap: Optional[float] = None
    phase_offset: float = 0.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "mode", ScheduleMode(self.mode))
        except ValueError:
            raise ConfigError(f"unknown policy mode {self.mode!r}") from None
        if not self.tdsi > 0:
            raise ConfigError(f"tdsi must be > 0, got {self.tdsi}")
        if not 0 <= self.tdsc <= self.tdsi:
            raise ConfigError(f"tdsc must satisfy 0 <= tdsc <= tdsi, got tdsc={self.tdsc}, tdsi={self.tdsi}")
        if not self.phase_offset >= 0:
            raise ConfigError(f"phase_offset must be >= 0, got {self.phase_offset}")
        if self.mode == ScheduleMode.THRESHOLD and not (self.aging_cap is not None and self.aging_cap > 0):
            raise ConfigError("threshold mode requires aging_cap > 0")


@dataclass(frozen=True, eq=False)
class ScheduledTrace:
    original: SpikeTrain
    adjusted: SpikeTrain
    destress_events: np.ndarray  # shape (n, 2): start_ms, end_ms
    delayed_count: int

    @property
    def delays(self) -> np.ndarray:
        return self.adjusted.times - self.original.times


def overhead(policy: DestressPolicy) -> float:
    return policy.tdsc / policy.tdsi


def periodic_windows(policy: DestressPolicy, horizon: float) -> np.ndarray:
    """Windows ``[offset + k*tdsi, offset + k*tdsi + tdsc)`` for k >= 1 starting before ``horizon``."""
    span = horizon - policy.phase_offset
    if span <= 0:
        return np.zeros((0, 2))
    count = math.ceil(span / policy.tdsi) - 1
    while count >= 0 and policy.phase_offset + (count + 1) * policy.tdsi < horizon:
        count += 1
    while count > 0 and policy.phase_offset + count * policy.tdsi >= horizon:
        count -= 1
    starts = policy.phase_offset + policy.tdsi * np.arange(1, count + 1, dtype=np.float64)
    return np.column_stack([starts, starts + policy.tdsc])


def release_times(times: np.ndarray, windows: np.ndarray) -> np.ndarray:
    """Move every time lying inside a window to the first instant outside all windows."""
    times = np.asarray(times, dtype=np.float64)
    if len(windows) == 0 or len(times) == 0:
        return times.copy()
    starts, ends = windows[:, 0], windows[:, 1]
    # touching windows form one busy block, released at the block's end
    block = np.ones(len(starts), dtype=bool)
    block[1:] = starts[1:] > ends[:-1]
    b_start = starts[block]
    b_end = np.maximum.reduceat(ends, np.flatnonzero(block))
    idx = np.searchsorted(b_start, times, side="right") - 1
    out = times.copy()
    hit = idx >= 0
    hit[hit] = times[hit] < b_end[idx[hit]]
    out[hit] = b_end[idx[hit]]
    return out


def _finish(train: SpikeTrain, windows: np.ndarray) -> ScheduledTrace:
    adjusted_times = release_times(train.times, windows)
    horizon = max(train.horizon, float(adjusted_times[-1]) if len(adjusted_times) else 0.0)
    adjusted = SpikeTrain(train.neuron_id, adjusted_times, horizon, strict=False)
    delayed = int(np.count_nonzero(adjusted_times != train.times))
    return ScheduledTrace(train, adjusted, windows, delayed)


def _crossing(feed: AgingFeed, x: float, level: VoltageLevel, d: float, cap: float) -> float:
    """Smallest offset in (0, d] at which damage reaches ``cap``, found by bisection."""
    lo, hi = 0.0, d
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if feed(x, level, mid) >= cap:
            hi = mid
        else:
            lo = mid
    return hi


def _threshold_windows(
    train: SpikeTrain, policy: DestressPolicy, pulse: PulseModel, feed: AgingFeed
) -> np.ndarray:
    horizon = train.horizon
    cap = policy.aging_cap
    windows: List[Tuple[float, float]] = []
    x = 0.0
    now = 0.0
    deadline = policy.phase_offset + policy.tdsi
    reach = pulse.pulse_width + policy.tdsc
    times = train.times

    while now < horizon:
        stop = min(deadline, horizon)
        opened = None
        if x >= cap and policy.tdsc > 0:
            opened = now
        elif stop > now:
            w = np.array(windows) if windows else np.zeros((0, 2))
            lo = np.searchsorted(times, now - reach, side="left")
            hi = np.searchsorted(times, stop, side="left")
            local = release_times(times[lo:hi], w)
            local = local[(local + pulse.pulse_width > now) & (local < stop)]
            seg = build_phases(local, stop, pulse, w[w[:, 1] > now] if len(w) else w)
            t = float(seg.starts[0]) if len(seg) else now
            for level, start, d in zip(seg.levels, seg.starts, seg.durations):
                if start + d <= now:
                    continue
                level = VoltageLevel(int(level))
                begin = max(start, now)
                d = start + d - begin
                after = feed(x, level, d)
                if x < cap <= after:
                    off = _crossing(feed, x, level, d, cap)
                    x = feed(x, level, off)
                    opened = begin + off
                    break
                x = after
                t = begin + d
            now = t if opened is None else opened

        if opened is None:
            if deadline >= horizon:
                break
            opened = deadline
            now = deadline
        end = opened + policy.tdsc
        windows.append((opened, end))
        dst = min(end, horizon) - opened
        if dst > 0:
            x = feed(x, VoltageLevel.DESTRESS, dst)
        now = end
        deadline = opened + policy.tdsi

    return np.array(windows, dtype=np.float64).reshape(-1, 2)


def schedule(
    train: SpikeTrain,
    policy: DestressPolicy,
    aging_feed: Optional[AgingFeed] = None,
    pulse: Optional[PulseModel] = None,
) -> ScheduledTrace:
    if policy.mode == ScheduleMode.PERIODIC:
        return _finish(train, periodic_windows(policy, train.horizon))
    if aging_feed is None:
        raise ConfigError("threshold mode needs an aging feed")
    windows = _threshold_windows(train, policy, pulse or PulseModel(), aging_feed)
    return _finish(train, windows)


def scheduled_phases(scheduled: ScheduledTrace, pulse: PulseModel) -> PhaseArrays:
    return build_phases(
        scheduled.adjusted.times, scheduled.original.horizon, pulse, scheduled.destress_events
    )


def compose_phases(
    train: SpikeTrain,
    policy: DestressPolicy,
    pulse: Optional[PulseModel] = None,
    aging_feed: Optional[AgingFeed] = None,
) -> List[VoltagePhase]:
    pulse = pulse or PulseModel()
    return scheduled_phases(schedule(train, policy, aging_feed, pulse), pulse).to_phases()


def stall_fraction(windows: np.ndarray, horizon: float) -> float:
    """Fraction of ``[0, horizon)`` spent inside destress windows."""
    if len(windows) == 0:
        return 0.0
    clipped = np.clip(windows, 0.0, horizon)
    return float(np.sum(clipped[:, 1] - clipped[:, 0])) / horizon
