import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from izhifit.model import (IntegrationDivergence, NeuronParams, NeuronState, SimConfig,
                           SpikeTrain, StimulusProtocol, VoltageTrace, fixed_points,
                           integrate_array, is_stable, rest_state, simulate, step)
from oracles import continuous_spike_times, euler_reference, quadratic_fixed_points

TONIC = NeuronParams(0.02, 0.2, -65.0, 6.0)
PHASIC = NeuronParams(0.02, 0.25, -65.0, 6.0)


def test_step_at_rest_is_unchanged():
    s, spiked = step(NeuronState(-70.0, -14.0), TONIC, 0.0, 0.25)
    assert (s.v, s.u, spiked) == (-70.0, -14.0, False)


def test_step_resets_state_above_cutoff():
    s, spiked = step(NeuronState(35.0, 0.0), TONIC, 123.0, 0.25)
    assert spiked and s == NeuronState(-65.0, 6.0)


def test_step_hand_example():
    s, spiked = step(NeuronState(-60.0, 0.0), TONIC, 10.0, 0.5)
    assert not spiked
    assert math.isclose(s.v, -63.0, rel_tol=1e-12)
    assert math.isclose(s.u, -0.12, rel_tol=1e-12)


def test_step_reset_uses_integrated_u():
    state = NeuronState(-20.0, 3.0)
    v1 = -20.0 + 0.5 * (0.04 * 400 - 100 + 140 - 3.0 + 50.0)
    assert v1 >= 30.0
    u1 = 3.0 + 0.5 * 0.02 * (0.2 * -20.0 - 3.0)
    s, spiked = step(state, TONIC, 50.0, 0.5)
    assert spiked and s.v == TONIC.c and s.u == u1 + TONIC.d


def test_step_divergence_and_bad_input():
    with pytest.raises(IntegrationDivergence):
        step(NeuronState(-60.0, 0.0), TONIC, 1e7, 0.25)
    with pytest.raises(IntegrationDivergence):
        step(NeuronState(float("nan"), 0.0), TONIC, 0.0, 0.25)
    with pytest.raises(ValueError):
        step(NeuronState(-60.0, 0.0), TONIC, 0.0, 0.0)


def test_simulate_divergence_names_step():
    proto = StimulusProtocol.constant(1e7, 10.0)
    with pytest.raises(IntegrationDivergence) as err:
        simulate(TONIC, proto, SimConfig(duration=10.0))
    assert err.value.step == 1


@pytest.mark.parametrize("field,value", [("a", math.nan), ("d", math.inf), ("c", -95.0),
                                         ("c", -20.0)])
def test_params_validation(field, value):
    kw = dict(a=0.02, b=0.2, c=-65.0, d=6.0)
    kw[field] = value
    with pytest.raises(ValueError):
        NeuronParams(**kw)


def test_config_and_protocol_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0)
    with pytest.raises(ValueError):
        SimConfig(dt=1.5)
    with pytest.raises(ValueError):
        SimConfig(dt=0.25, duration=0.1)
    with pytest.raises(ValueError):
        StimulusProtocol([(0.0, 5.0, 0.0, 0.0), (6.0, 10.0, 0.0, 0.0)], 10.0)
    with pytest.raises(ValueError):
        StimulusProtocol([(0.0, 10.0, 0.0, math.inf)], 10.0)
    with pytest.raises(ValueError):
        SpikeTrain(np.array([5.0, 5.0]), 10.0)
    with pytest.raises(ValueError):
        SpikeTrain(np.array([5.0, 11.0]), 10.0)
    with pytest.raises(ValueError):
        VoltageTrace(0.0, 0.25, np.array([0.0, math.nan]))


def test_protocol_current_and_ramp():
    proto = StimulusProtocol([(0.0, 10.0, 0.0, 0.0), (10.0, 20.0, 0.0, 10.0)], 20.0)
    assert proto.current(5.0) == 0.0
    assert proto.current(15.0) == pytest.approx(5.0)
    assert proto.current(10.0) == 0.0
    steps = StimulusProtocol.steps([(10.0, 4.0), (20.0, -2.0)], 30.0, baseline=1.0)
    assert list(steps.current(np.array([0.0, 9.9, 10.0, 25.0]))) == [1.0, 1.0, 4.0, -2.0]
    assert StimulusProtocol.from_dict(steps.to_dict()) == steps


def test_fixed_points_examples():
    fps = fixed_points(TONIC, 0.0)
    assert [(round(s.v, 12), round(s.u, 12)) for s in fps] == [(-70.0, -14.0), (-50.0, -10.0)]
    assert fixed_points(TONIC, 10.0) == []
    (tangent,) = fixed_points(NeuronParams(0.02, 5.0, -65.0, 6.0), -140.0)
    assert tangent.v == 0.0 and tangent.u == 0.0


@settings(max_examples=200, deadline=None)
@given(b=st.floats(-1.5, 0.5), i=st.floats(-50, 50))
def test_fixed_points_match_quadratic_formula(b, i):
    got = fixed_points(NeuronParams(0.02, b, -65.0, 6.0), i)
    want = quadratic_fixed_points(b, i)
    assert len(got) == len(want) or (len(got) == 1 and len(want) == 2
                                     and math.isclose(*[w[0] for w in want], abs_tol=1e-6))
    for s, (v, u) in zip(got, want):
        assert math.isclose(s.v, v, rel_tol=1e-9, abs_tol=1e-9)
        assert math.isclose(s.u, u, rel_tol=1e-9, abs_tol=1e-9)


@settings(max_examples=200, deadline=None)
@given(a=st.floats(-0.1, 2.0), b=st.floats(-1.5, 0.4), i=st.floats(-30, 30),
       dt=st.floats(1e-3, 1.0))
def test_equilibrium_is_stationary(a, b, i, dt):
    params = NeuronParams(a, b, -65.0, 6.0)
    for fp in fixed_points(params, i):
        s, spiked = step(fp, params, i, dt)
        assert not spiked
        # residual of a float root is a few ulps of the largest term (~400)
        assert abs(s.v - fp.v) <= 1e-11
        assert abs(s.u - fp.u) <= 1e-11


def test_rest_state_stability():
    rest = rest_state(TONIC, 0.0)
    assert rest.v == pytest.approx(-70.0) and is_stable(TONIC, rest)
    assert not is_stable(TONIC, fixed_points(TONIC, 0.0)[1])
    fallback = rest_state(TONIC, 10.0)
    assert fallback.v == -70.0 and fallback.u == pytest.approx(-14.0)


@pytest.mark.parametrize("params", [TONIC, PHASIC, NeuronParams(0.1, 0.26, -65.0, 2.0)])
def test_flat_trace_at_equilibrium(params):
    trace, train = simulate(params, StimulusProtocol.constant(0.0, 200.0))
    assert len(train) == 0
    assert np.ptp(trace.samples) < 1e-9


def test_sample_count_and_clamp():
    proto = StimulusProtocol.steps([(10.0, 10.0)], 400.0)
    trace, train = simulate(TONIC, proto, SimConfig(dt=0.25, duration=400.0))
    assert len(trace) == 1601
    assert trace.samples.max() == 30.0
    idx = np.rint(train.times / 0.25).astype(int)
    assert np.all(trace.samples[idx] == 30.0)
    assert np.count_nonzero(trace.samples == 30.0) == len(train)


def test_kernel_matches_pure_python_reference():
    proto = StimulusProtocol.steps([(10.0, 10.0)], 200.0)
    trace, train = simulate(TONIC, proto, SimConfig(dt=0.25, duration=200.0))
    rest = rest_state(TONIC, 0.0)
    _, v_ref, spk_ref = euler_reference(0.02, 0.2, -65.0, 6.0, lambda t: proto.current(t),
                                        0.25, 200.0, rest.v, rest.u)
    # the reference groups 0.04 * v**2 differently, so allow rounding differences
    np.testing.assert_allclose(trace.samples, v_ref, rtol=1e-9, atol=1e-9)
    np.testing.assert_array_equal(train.times, spk_ref)


def test_tonic_example_regular_spiking():
    proto = StimulusProtocol.steps([(10.0, 10.0)], 400.0)
    trace, train = simulate(TONIC, proto, SimConfig(dt=0.25, duration=400.0))
    isi = np.diff(train.times[1:])
    assert len(train) >= 5
    assert isi.std() / isi.mean() < 0.2


def test_tonic_spike_times_against_continuous_reference():
    proto = StimulusProtocol.steps([(10.0, 10.0)], 400.0)
    rest = rest_state(TONIC, 0.0)
    ref = continuous_spike_times(0.02, 0.2, -65.0, 6.0, lambda t: proto.current(t),
                                 [10.0], 400.0, rest.v, rest.u)
    _, fine = simulate(TONIC, proto, SimConfig(dt=0.001, duration=400.0))
    assert len(fine) == len(ref)
    assert np.max(np.abs(fine.times - ref)) <= 1.0
    # at the default step the period is right even though the phase drifts
    _, coarse = simulate(TONIC, proto, SimConfig(dt=0.25, duration=400.0))
    n = min(len(coarse), len(ref))
    assert np.max(np.abs(np.diff(coarse.times[1:n]) - np.diff(ref[1:n]))) <= 1.0


def test_phasic_single_spike_near_onset():
    proto = StimulusProtocol.steps([(20.0, 0.5)], 200.0)
    rest = rest_state(PHASIC, 0.0)
    ref = continuous_spike_times(0.02, 0.25, -65.0, 6.0, lambda t: proto.current(t),
                                 [20.0], 200.0, rest.v, rest.u)
    trace, train = simulate(PHASIC, proto)
    assert len(ref) == 1 and len(train) == 1
    assert abs(train.times[0] - ref[0]) <= 1.0
    assert train.times[0] - 20.0 < 30.0
    tail = trace.samples[trace.times > train.times[0] + 50.0]
    assert tail.max() < -50.0 and np.ptp(tail[-100:]) < 0.5


def test_step_halving_convergence():
    # non-spiking 50 ms relaxation under a subthreshold step
    params = TONIC
    proto = StimulusProtocol.steps([(5.0, 2.0)], 50.0)
    runs = {dt: simulate(params, proto, SimConfig(dt=dt, duration=50.0))[0]
            for dt in (0.5, 0.25, 0.125)}
    for tr in runs.values():
        assert tr.samples.max() < 0.0

    def err(coarse, fine):
        return np.max(np.abs(runs[coarse].samples - runs[fine].samples[::2]))

    assert err(0.5, 0.25) / err(0.25, 0.125) >= 1.8


def test_simulate_is_deterministic():
    proto = StimulusProtocol.steps([(10.0, 10.0)], 300.0)
    a = simulate(TONIC, proto)
    b = simulate(TONIC, proto)
    assert a[0].samples.tobytes() == b[0].samples.tobytes()
    assert a[1].times.tobytes() == b[1].times.tobytes()


def test_initial_state_overrides():
    proto = StimulusProtocol.constant(0.0, 10.0)
    tr, _ = simulate(TONIC, proto, SimConfig(duration=10.0, v0=-60.0))
    assert tr.samples[0] == -60.0
    v, _ = integrate_array(TONIC, np.zeros(4), 0.25, -60.0, 5.0)
    s = NeuronState(-60.0, 5.0)
    for k in range(4):
        s, _ = step(s, TONIC, 0.0, 0.25)
        assert v[k + 1] == s.v


def test_constant_work_per_step():
    import time

    drive = np.full(2_000_000, 10.0)
    integrate_array(TONIC, drive[:10], 0.25, -70.0, -14.0)
    timings = []
    for n in (200_000, 2_000_000):
        t0 = time.perf_counter()
        integrate_array(TONIC, drive[:n], 0.25, -70.0, -14.0)
        timings.append((time.perf_counter() - t0) / n)
    # per-step cost does not grow with run length
    assert timings[1] < 3 * timings[0]
