"""Spike-trace-driven NBTI/TDDB aging simulator for neuromorphic neurons with periodic destress."""

__version__ = "0.1.0"

from .aging import (  # noqa: E402
    AgingState,
    DeviceParams,
    VoltageLevel,
    VoltagePhase,
    aging_trajectory,
    mttf_nbti,
    mttf_tddb,
    step_aging,
)
from .metrics import MetricsReport, RateProfile, disorder, isi_distortion, mean_isi, normalize_aging, rate_profile  # noqa: E402
from .scheduler import DestressPolicy, ScheduleMode, ScheduledTrace, compose_phases, overhead, schedule  # noqa: E402
from .trace import (  # noqa: E402
    PulseModel,
    SpikeTrain,
    WorkloadClass,
    WorkloadSpec,
    generate_poisson,
    load_trace,
    save_trace,
    to_voltage_phases,
)
