"""
Calibration helpers.

Class rates
    The sparse class is pinned at a LeNet-like 0.02 spikes/ms. The dense rate is
    the smallest candidate whose relative NBTI increase (tdsi 10 -> 50 ms) is at
    least ``target_ratio`` times the sparse class's increase. With the default
    device parameters 10 spikes/ms reaches a ratio of 4.999, so a target of 5
    steps on to 15 spikes/ms (ratio 7.6). ``trace.DEFAULT_CLASS_RATES`` keeps
    10 spikes/ms, which already clears any target up to 4.99.

Activation energy
    ``fit_activation_energy`` searches NBTI ``Ea`` so that the mean normalized
    NBTI aging at the target temperatures matches requested ratios against the
    reference temperature (minimax error).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Dict, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .aging import DeviceParams
from .harness import RunConfig, run
from .scheduler import DestressPolicy
from .trace import DEFAULT_CLASS_RATES, WorkloadClass, WorkloadSpec, generate_poisson

DENSE_RATE_GRID = (0.5, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 15.0, 20.0)


def relative_nbti_increase(
    cls: WorkloadClass | str,
    rate: float,
    *,
    params: DeviceParams | None = None,
    tdsi_lo: float = 10.0,
    tdsi_hi: float = 50.0,
    tdsc: float = 1.0,
    neurons: int = 50,
    horizon: float = 1200.0,
    seed: int = 0,
) -> float:
    """``aging(tdsi_hi) / aging(tdsi_lo) - 1`` for one workload realization."""
    params = params or DeviceParams()
    spec = WorkloadSpec(cls, rate=rate, num_neurons=neurons, horizon=horizon, seed=seed)
    trains = generate_poisson(spec)
    totals = []
    for tdsi in (tdsi_lo, tdsi_hi):
        cfg = RunConfig(spec, params=params, policy=DestressPolicy(tdsi, tdsc))
        totals.append(run(cfg, trains).summary.nbti_aging_total)
    return totals[1] / totals[0] - 1.0


@dataclass(frozen=True)
class RateCalibration:
    sparse_rate: float
    dense_rate: float
    sparse_increase: float
    dense_increase: float
    ratio: float
    scanned: Dict[float, float]


def calibrate_class_rates(
    target_ratio: float = 5.0,
    sparse_rate: float = DEFAULT_CLASS_RATES[WorkloadClass.SPARSE],
    dense_grid: Sequence[float] = DENSE_RATE_GRID,
    **kwargs,
) -> RateCalibration:
    sparse = relative_nbti_increase(WorkloadClass.SPARSE, sparse_rate, **kwargs)
    scanned = {}
    for rate in sorted(dense_grid):
        inc = relative_nbti_increase(WorkloadClass.DENSE, rate, **kwargs)
        scanned[rate] = inc
        if inc >= target_ratio * sparse:
            return RateCalibration(sparse_rate, rate, sparse, inc, inc / sparse, scanned)
    raise ValueError(
        f"no dense rate in {list(dense_grid)} reaches ratio {target_ratio}; best {max(scanned.values()) / sparse:.3f}"
    )


@dataclass(frozen=True)
class ActivationFit:
    nbti_Ea: float
    achieved: Dict[float, float]
    max_error: float


def temperature_response(
    params: DeviceParams,
    temperatures: Sequence[float],
    reference: float = 300.0,
    classes: Sequence[WorkloadClass] = tuple(WorkloadClass),
    tdsi_values: Sequence[float] = (10.0, 20.0, 30.0, 40.0, 50.0),
    tdsc: float = 1.0,
    neurons: int = 20,
    seed: int = 0,
) -> Dict[float, float]:
    """Mean over classes and tdsi of NBTI aging at each temperature / at ``reference``."""
    ratios: Dict[float, list] = {t: [] for t in temperatures}
    for cls in classes:
        spec = WorkloadSpec(cls, num_neurons=neurons, seed=seed)
        trains = generate_poisson(spec)
        for tdsi in tdsi_values:
            policy = DestressPolicy(tdsi, tdsc)
            ref = run(RunConfig(spec, params=params, policy=policy, temperature=reference), trains)
            for t in temperatures:
                cur = run(RunConfig(spec, params=params, policy=policy, temperature=t), trains)
                ratios[t].append(cur.summary.nbti_aging_total / ref.summary.nbti_aging_total)
    return {t: float(np.mean(v)) for t, v in ratios.items()}


def fit_activation_energy(
    targets: Mapping[float, float] = {325.0: 1.07, 350.0: 1.26},
    reference: float = 300.0,
    params: DeviceParams | None = None,
    bounds: tuple = (0.0, 0.2),
    **kwargs,
) -> ActivationFit:
    params = params or DeviceParams()
    temps = sorted(targets)

    def error(ea: float) -> float:
        got = temperature_response(dataclasses.replace(params, nbti_Ea=ea), temps, reference, **kwargs)
        return max(abs(got[t] - targets[t]) for t in temps)

    res = minimize_scalar(error, bounds=bounds, method="bounded", options={"xatol": 1e-6})
    ea = float(res.x)
    achieved = temperature_response(dataclasses.replace(params, nbti_Ea=ea), temps, reference, **kwargs)
    return ActivationFit(ea, achieved, max(abs(achieved[t] - targets[t]) for t in temps))
