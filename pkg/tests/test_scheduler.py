import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neuroage.aging import DeviceParams, VoltageLevel, aging_trajectory
from neuroage.harness import NbtiFeed
from neuroage.scheduler import (
    ConfigError,
    DestressPolicy,
    compose_phases,
    overhead,
    periodic_windows,
    release_times,
    schedule,
    scheduled_phases,
    stall_fraction,
)
from neuroage.trace import PulseModel, SpikeTrain, generate_poisson, WorkloadSpec, to_voltage_phases

from . import oracles

R, I, D = VoltageLevel.READ, VoltageLevel.IDLE, VoltageLevel.DESTRESS


@pytest.mark.parametrize("tdsc, tdsi, expected", [(1.0, 10.0, 0.1), (0.0, 50.0, 0.0), (10.0, 10.0, 1.0)])
def test_overhead(tdsc, tdsi, expected):
    assert overhead(DestressPolicy(tdsi, tdsc)) == expected


@pytest.mark.parametrize(
    "kw",
    [dict(tdsi=0, tdsc=0), dict(tdsi=10, tdsc=11), dict(tdsi=10, tdsc=-1),
     dict(tdsi=10, tdsc=1, mode="threshold"), dict(tdsi=10, tdsc=1, mode="threshold", aging_cap=0),
     dict(tdsi=10, tdsc=1, mode="sometimes")],
)
def test_policy_validation(kw):
    with pytest.raises(ConfigError):
        DestressPolicy(**kw)


def test_schedule_example_delays_one_spike():
    train = SpikeTrain(0, [2.0, 12.0], 20.0)
    st_ = schedule(train, DestressPolicy(10.0, 3.0))
    assert st_.destress_events.tolist() == [[10.0, 13.0]]
    assert list(st_.adjusted.times) == [2.0, 13.0]
    assert st_.delayed_count == 1
    # event-driven tick oracle agrees
    assert list(oracles.tick_schedule([2.0, 12.0], 10.0, 3.0, 0.0, 20.0)) == pytest.approx([2.0, 13.0])


def test_zero_cycle_is_identity():
    train = SpikeTrain(0, [2.0, 10.0, 12.5], 40.0)
    st_ = schedule(train, DestressPolicy(10.0, 0.0))
    assert np.array_equal(st_.adjusted.times, train.times)
    assert st_.delayed_count == 0


def test_no_spikes_still_emits_windows():
    st_ = schedule(SpikeTrain(0, [], 35.0), DestressPolicy(10.0, 2.0))
    assert len(st_.adjusted) == 0
    assert st_.destress_events.tolist() == [[10.0, 12.0], [20.0, 22.0], [30.0, 32.0]]


def test_spike_at_window_end_is_not_delayed():
    st_ = schedule(SpikeTrain(0, [13.0], 20.0), DestressPolicy(10.0, 3.0))
    assert st_.delayed_count == 0


def test_several_spikes_in_one_window_release_together_in_order():
    st_ = schedule(SpikeTrain(0, [10.5, 11.0, 12.9, 13.0], 20.0), DestressPolicy(10.0, 3.0))
    assert list(st_.adjusted.times) == [13.0, 13.0, 13.0, 13.0]
    assert list(st_.delays) == pytest.approx([2.5, 2.0, 0.1, 0.0])


def test_touching_windows_release_after_the_block():
    # tdsc == tdsi: every window abuts the next one
    assert list(release_times(np.array([15.0, 25.0]), periodic_windows(DestressPolicy(10, 10), 40.0))) == [40.0, 40.0]


def test_window_at_horizon_is_excluded():
    assert periodic_windows(DestressPolicy(10.0, 2.0), 20.0).tolist() == [[10.0, 12.0]]


def test_phase_offset_shifts_windows():
    assert periodic_windows(DestressPolicy(10.0, 1.0, phase_offset=3.0), 30.0).tolist() == [[13.0, 14.0], [23.0, 24.0]]


def test_compose_empty_train():
    phases = compose_phases(SpikeTrain(0, [], 20.0), DestressPolicy(10.0, 2.0))
    assert [(p.level, p.duration) for p in phases] == [(I, 10.0), (D, 2.0), (I, 8.0)]


def test_compose_zero_cycle_matches_plain_phases():
    train = SpikeTrain(0, [2.0], 30.0)
    a = compose_phases(train, DestressPolicy(10.0, 0.0))
    b = to_voltage_phases(train)
    assert [(p.level, p.duration) for p in a] == [(p.level, p.duration) for p in b]


def test_compose_dense_train_matches_tick_oracle():
    rng = np.random.default_rng(5)
    horizon = 200.0
    ticks = np.sort(rng.choice(oracles.to_ticks(horizon) - 20, size=300, replace=False))
    times = np.round(ticks * oracles.TICK, 2)
    train = SpikeTrain(0, times, horizon)
    policy = DestressPolicy(10.0, 3.0)
    phases = compose_phases(train, policy, PulseModel(0.2))

    adjusted = oracles.tick_schedule(times, 10.0, 3.0, 0.0, horizon)
    mask = oracles.tick_busy(10.0, 3.0, 0.0, horizon)
    want = oracles.run_lengths(oracles.tick_levels(adjusted, mask, 0.2, horizon))
    got = [(int(p.level), p.duration) for p in phases]
    assert [lv for lv, _ in got] == [lv for lv, _ in want]
    assert [d for _, d in got] == pytest.approx([d for _, d in want], abs=1e-6)


def test_periodic_matches_tick_oracle_on_random_cases():
    rng = np.random.default_rng(2024)
    for _ in range(300):
        times, horizon, tdsi, tdsc, offset = oracles.random_periodic_case(rng)
        got = schedule(SpikeTrain(0, times, horizon), DestressPolicy(tdsi, tdsc, phase_offset=offset))
        want = oracles.tick_schedule(times, tdsi, tdsc, offset, horizon)
        np.testing.assert_allclose(got.adjusted.times, want, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(0, 500, allow_nan=False), max_size=300, unique=True).map(sorted),
    st.floats(0.5, 60), st.floats(0, 1),
)
def test_conservation_and_order(times, tdsi, frac):
    policy = DestressPolicy(tdsi, tdsi * frac)
    st_ = schedule(SpikeTrain(0, times, 500.0), policy)
    orig, adj = st_.original.times, st_.adjusted.times
    assert len(adj) == len(orig)
    assert np.all(adj >= orig)
    assert np.all(np.diff(adj) >= 0)
    for s, e in st_.destress_events:
        assert not np.any((adj > s) & (adj < e)) and not np.any((adj == s) & (e > s))
    assert st_.delayed_count == int(np.count_nonzero(adj != orig))


@settings(max_examples=200)
@given(st.floats(1, 100), st.floats(0, 1), st.floats(100, 20000))
def test_periodic_destress_time(tdsi, frac, horizon):
    policy = DestressPolicy(tdsi, tdsi * frac)
    w = periodic_windows(policy, horizon)
    inside = w[w[:, 1] <= horizon]
    # each length is end - start near the horizon, so it carries ~ulp(horizon) of error
    slack = len(inside) * np.spacing(horizon) * 2
    assert np.sum(inside[:, 1] - inside[:, 0]) == pytest.approx(policy.tdsc * len(inside), abs=slack)
    assert abs(stall_fraction(w, horizon) - overhead(policy)) <= policy.tdsc / horizon * (1 + 1e-9) + 1e-12


# --- threshold mode -------------------------------------------------------


def threshold_case(seed, cap=60.0, rate=4.0, horizon=300.0):
    params = DeviceParams()
    train = generate_poisson(WorkloadSpec("dense", rate=rate, num_neurons=1, horizon=horizon, seed=seed))[0]
    policy = DestressPolicy(40.0, 1.0, mode="threshold", aging_cap=cap)
    return params, train, policy


def test_threshold_requires_feed():
    _, train, policy = threshold_case(0)
    with pytest.raises(ConfigError):
        schedule(train, policy)


@pytest.mark.parametrize("seed", range(8))
def test_threshold_respects_cap(seed):
    params, train, policy = threshold_case(seed)
    pulse = PulseModel()
    st_ = schedule(train, policy, NbtiFeed(params, 300.0), pulse)
    phases = scheduled_phases(st_, pulse)
    traj = aging_trajectory(phases.to_phases(), 300.0, params)
    ends = phases.starts + phases.durations
    # more windows than the 40 ms timer alone would give
    assert len(st_.destress_events) > len(periodic_windows(DestressPolicy(40.0, 1.0), train.horizon))
    nbti_at = dict(zip(np.round(ends, 9), (s.nbti_damage for s in traj)))
    for start, _ in st_.destress_events:
        before = nbti_at.get(round(start, 9), 0.0)
        assert before <= policy.aging_cap * (1 + 1e-9)
    assert max(s.nbti_damage for s in traj) <= policy.aging_cap * (1 + 1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_threshold_matches_tick_oracle(seed):
    params, train, policy = threshold_case(seed, horizon=150.0)
    times = np.round(train.times, 2)
    times = np.unique(times)
    train = SpikeTrain(0, times, 150.0)
    st_ = schedule(train, policy, NbtiFeed(params, 300.0), PulseModel(0.2))
    # a finer grid than the periodic oracle: crossing-time error compounds across windows
    want = oracles.tick_threshold_windows(times, 40.0, 1.0, policy.aging_cap, 0.2, 150.0, 300.0, params, tick=5e-4)
    got = st_.destress_events[:, 0]
    assert len(got) == len(want)
    np.testing.assert_allclose(got, want, atol=0.02)
