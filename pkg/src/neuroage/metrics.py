"""Performance and reliability metrics for original vs destress-adjusted spike trains."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from .trace import SpikeTrain


class MetricError(ValueError):
    """A metric is undefined for the given input."""


@dataclass(frozen=True, eq=False)
class RateProfile:
    values: np.ndarray  # spikes/ms per bin
    bin_width: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or len(values) < 1:
            raise MetricError("rate profile needs at least one bin")
        if np.any(values < 0):
            raise MetricError("rates must be >= 0")
        if not self.bin_width > 0:
            raise MetricError(f"bin_width must be > 0, got {self.bin_width}")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class MetricsReport:
    mean_isi_original: Optional[float]
    mean_isi_adjusted: Optional[float]
    isi_distortion: Optional[float]
    isi_distortion_rel: Optional[float]
    disorder: float
    nbti_aging_total: float
    tddb_aging_total: float
    overhead: float
    nbti_aging_norm: Optional[float] = None
    tddb_aging_norm: Optional[float] = None
    isi_excluded: int = 0


def mean_isi(train: SpikeTrain | Sequence[float] | np.ndarray) -> float:
    """Average inter-spike interval; telescopes to ``(t_K - t_1) / (K - 1)``."""
    times = train.times if isinstance(train, SpikeTrain) else np.asarray(train, dtype=np.float64)
    k = len(times)
    if k < 2:
        raise MetricError(f"mean ISI needs at least 2 spikes, got {k}")
    return float((times[-1] - times[0]) / (k - 1))


def isi_distortion(original: SpikeTrain, adjusted: SpikeTrain) -> float:
    if len(original) != len(adjusted):
        raise MetricError(
            f"spike count mismatch: original {len(original)} vs adjusted {len(adjusted)}"
        )
    return abs(mean_isi(adjusted) - mean_isi(original))


def rate_profile(train: SpikeTrain, bin_width: float, horizon: Optional[float] = None) -> RateProfile:
    """Spikes per ms in consecutive ``bin_width`` bins; a trailing partial bin is dropped."""
    if not bin_width > 0:
        raise MetricError(f"bin_width must be > 0, got {bin_width}")
    horizon = train.horizon if horizon is None else horizon
    n = int(math.floor(horizon / bin_width + 1e-9))
    if n < 1:
        raise MetricError(f"horizon {horizon} ms shorter than one {bin_width} ms bin")
    idx = np.floor(train.times / bin_width).astype(np.int64)
    idx = idx[(idx >= 0) & (idx < n)]
    counts = np.bincount(idx, minlength=n)[:n]
    return RateProfile(counts / bin_width, bin_width)


def disorder(expected: RateProfile, actual: RateProfile) -> float:
    """Mean squared difference between expected and actual per-bin rates."""
    if len(expected) != len(actual) or expected.bin_width != actual.bin_width:
        raise MetricError(
            f"profile shapes differ: {len(expected)} x {expected.bin_width} ms vs "
            f"{len(actual)} x {actual.bin_width} ms"
        )
    diff = expected.values - actual.values
    return float(np.dot(diff, diff) / len(diff))


def neuron_metrics(
    original: SpikeTrain,
    adjusted: SpikeTrain,
    bin_width: float,
    nbti: float,
    tddb: float,
    overhead: float,
) -> MetricsReport:
    if len(original) >= 2:
        before = mean_isi(original)
        after = mean_isi(adjusted)
        dist = abs(after - before)
        rel = dist / before if before > 0 else 0.0
        excluded = 0
    else:
        before = after = dist = rel = None
        excluded = 1
    dis = disorder(
        rate_profile(original, bin_width, original.horizon),
        rate_profile(adjusted, bin_width, original.horizon),
    )
    return MetricsReport(before, after, dist, rel, dis, nbti, tddb, overhead, isi_excluded=excluded)


def _mean(values) -> float:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else 0.0


def aggregate(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Application-level scalars: arithmetic mean over neurons.

    ISI fields average only neurons with two or more spikes and are 0.0 when no
    neuron qualifies; ``isi_excluded`` counts the skipped neurons.
    """
    if not reports:
        raise MetricError("no neuron reports to aggregate")
    return MetricsReport(
        mean_isi_original=_mean(r.mean_isi_original for r in reports),
        mean_isi_adjusted=_mean(r.mean_isi_adjusted for r in reports),
        isi_distortion=_mean(r.isi_distortion for r in reports),
        isi_distortion_rel=_mean(r.isi_distortion_rel for r in reports),
        disorder=_mean(r.disorder for r in reports),
        nbti_aging_total=_mean(r.nbti_aging_total for r in reports),
        tddb_aging_total=_mean(r.tddb_aging_total for r in reports),
        overhead=reports[0].overhead,
        isi_excluded=sum(r.isi_excluded for r in reports),
    )


def normalize_aging(reports: Mapping[str, MetricsReport], baseline_key: str) -> Dict[str, MetricsReport]:
    """Fill ``*_aging_norm`` with each run's totals divided by the baseline run's."""
    if baseline_key not in reports:
        raise MetricError(f"baseline run {baseline_key!r} not found")
    base = reports[baseline_key]
    if not (base.nbti_aging_total > 0 and base.tddb_aging_total > 0):
        raise MetricError(f"baseline run {baseline_key!r} has zero aging; cannot normalize")
    return {
        key: replace(
            r,
            nbti_aging_norm=r.nbti_aging_total / base.nbti_aging_total,
            tddb_aging_norm=r.tddb_aging_total / base.tddb_aging_total,
        )
        for key, r in reports.items()
    }
