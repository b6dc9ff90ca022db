import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from sdlab.dynamics import (
    AwarenessState,
    Constant,
    DivergenceError,
    DuffingParams,
    InvalidStateError,
    Schedule,
    SeededNoise,
    SingularityError,
    Sinusoid,
    SuppressiveParams,
    Trajectory,
    Zero,
    derivative,
    energy,
    input_from_dict,
    response,
    simulate,
    step,
    suppression_weight,
)

from oracles import reference_solution

CHAOTIC = DuffingParams(0.3, -1.0, 1.0, 0.5, 1.2)
UNFORCED = DuffingParams(0.3, -1.0, 1.0, 0.0, 1.2)
SP = SuppressiveParams(1.0, 1.0, 0.45)

# One RK4 step (h=0.01) from D=1, D_dot=0, S=0 under the chaotic set, checked
# against DOP853 at rtol=1e-13 (tests/oracles.reference_solution).
ONE_STEP_REFERENCE = (1.0000000999233265, 2.9969163309359024e-05, 0.0)


def test_derivative_origin_fixed_point():
    dp = DuffingParams(0.3, -1.0, 1.0, 0.0, 1.2)
    assert derivative(AwarenessState(), dp, SP, 0.0) == (0.0, 0.0, 0.0)


def test_derivative_s_equilibrium():
    s0 = 2.5
    sp = SuppressiveParams(C=3.0, a=0.4, epsilon=0.1)
    assert derivative(AwarenessState(S=s0), CHAOTIC, sp, sp.a * s0)[2] == 0.0


def test_derivative_substitution():
    assert derivative(AwarenessState(0.0, 1.0, 0.0, 0.0), CHAOTIC, SP, 0.0) == (0.0, 0.0, 0.0)


def test_derivative_general_point():
    st_ = AwarenessState(t=0.7, D=0.4, D_dot=-0.2, S=1.5)
    dD, dV, dS = derivative(st_, CHAOTIC, SP, 2.0)
    assert dD == -0.2
    assert dV == pytest.approx(-0.3 * -0.2 + 0.4 - 0.4**3 + 0.5 * math.sin(1.2 * 0.7))
    assert dS == pytest.approx(1.0 * (2.0 - 1.5))


@pytest.mark.parametrize("bad", [math.nan, math.inf])
def test_derivative_rejects_non_finite(bad):
    with pytest.raises(InvalidStateError):
        derivative(AwarenessState(), CHAOTIC, SP, bad)
    with pytest.raises(InvalidStateError):
        AwarenessState(D=bad)


@pytest.mark.parametrize("D,S,eps,expected", [
    (0.0, 2.0, 0.01, 2.0),
    (1.0, 0.0, 0.1, 10.0),
    (0.5, 1.0, 0.01, 1.0 + 0.5 / 1.01),
])
def test_response_examples(D, S, eps, expected):
    assert response(D, S, eps) == pytest.approx(expected, rel=1e-15)


def test_response_singularity_names_time():
    with pytest.raises(SingularityError, match="t=3.5"):
        response(1.0, -0.1, 0.1, t=3.5)
    with pytest.raises(SingularityError):
        response(1.0, -0.5, 0.1)


@given(st.floats(0, 100), st.floats(0, 100), st.floats(1e-4, 1))
def test_suppression_weight_strictly_decreasing(s1, s2, eps):
    lo, hi = sorted((s1, s2))
    assume(hi - lo > 1e-9)
    assert suppression_weight(hi, eps) < suppression_weight(lo, eps)


def test_step_fixed_point_only_advances_time():
    dp = DuffingParams(0.3, -1.0, 1.0, 0.0, 1.2)
    out = step(AwarenessState(), dp, SP, Zero(), 0.37)
    assert (out.D, out.D_dot, out.S) == (0.0, 0.0, 0.0)
    assert out.t == 0.37


def test_step_matches_high_accuracy_reference():
    h = 0.01
    out = step(AwarenessState(0.0, 1.0, 0.0, 0.0), CHAOTIC, SP, Zero(), h)
    # local truncation error of RK4 is O(h**5)
    np.testing.assert_allclose((out.D, out.D_dot, out.S), ONE_STEP_REFERENCE, rtol=0, atol=h**5)
    assert out.t == h


def test_step_reference_recomputed():
    params = (0.3, -1.0, 1.0, 0.5, 1.2, 1.0, 1.0)
    sol = reference_solution([1.0, 0.0, 0.0], (0.0, 0.01), params, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(sol.y[:, -1], ONE_STEP_REFERENCE, atol=1e-14)


def test_s_subsystem_closed_form():
    sp = SuppressiveParams(C=1.0, a=1.0, epsilon=0.45)
    dp = DuffingParams(0.3, 1.0, 1.0, 0.0, 1.2)
    traj = simulate(AwarenessState(), dp, sp, Constant(1.0), 0.01, 10.0)
    assert traj.t[-1] == pytest.approx(10.0)
    err = np.max(np.abs(traj.S - (1.0 - np.exp(-traj.t))))
    assert err < 1e-8
    assert traj.S[-1] == pytest.approx(1 - math.exp(-10), abs=1e-8)


def test_step_rejects_bad_h():
    with pytest.raises(ValueError):
        step(AwarenessState(), CHAOTIC, SP, Zero(), 0.0)


def test_step_divergence_carries_last_state():
    runaway = DuffingParams(0.0, 0.0, -1.0, 0.0, 0.0)
    s = AwarenessState(0.0, 1e5, 0.0, 0.0)
    with pytest.raises(DivergenceError) as info:
        for _ in range(1000):
            s = step(s, runaway, SP, Zero(), 1.0)
    assert info.value.state is not None
    assert math.isfinite(info.value.state.D)


def test_simulate_divergence_attaches_partial():
    runaway = DuffingParams(0.0, 0.0, -1.0, 0.0, 0.0)
    with pytest.raises(DivergenceError) as info:
        simulate(AwarenessState(0.0, 10.0, 0.0, 0.0), runaway, SP, Zero(), 0.01, 100.0)
    partial = info.value.partial
    assert isinstance(partial, Trajectory) and len(partial) >= 1
    assert np.all(np.isfinite(partial.data))
    assert info.value.step_index == len(partial) - 1


def test_simulate_zero_model_all_zero():
    dp = DuffingParams(0.3, -1.0, 1.0, 0.0, 1.2)
    traj = simulate(AwarenessState(), dp, SP, Zero(), 0.01, 5.0)
    assert len(traj) == 501
    assert not np.any(traj.data[:, 1:])


def test_simulate_sample_count_and_grid():
    traj = simulate(AwarenessState(t=2.0), CHAOTIC, SP, Zero(), 0.03, 1.0)
    assert len(traj) == math.ceil(1.0 / 0.03) + 1
    assert np.all(np.diff(traj.t) > 0)
    np.testing.assert_allclose(np.diff(traj.t), 0.03, rtol=1e-9)


def test_simulate_max_steps():
    with pytest.raises(ValueError, match="max_steps"):
        simulate(AwarenessState(), CHAOTIC, SP, Zero(), 0.01, 100.0, max_steps=100)


def test_r_column_is_recomputable():
    traj = simulate(AwarenessState(0.0, 1.0, 0.0, 0.2), CHAOTIC, SP, Sinusoid(2.0, 0.3), 0.01, 50.0)
    recomputed = traj.S + traj.D / (SP.epsilon + traj.S)
    np.testing.assert_allclose(traj.R, recomputed, rtol=1e-12)


def test_simulate_is_bit_deterministic():
    args = (AwarenessState(0.0, 1.0, 0.0, 0.0), CHAOTIC, SP, Constant(0.3), 0.01, 100.0)
    a, b = simulate(*args), simulate(*args)
    assert a.data.tobytes() == b.data.tobytes()


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(-3.0, 3.0), st.floats(0.2, 1.5), st.floats(0.2, 1.5))
def test_s_contraction_bound(I0, S0, C, a):
    # An absolute slack of 10 h**4 covers RK4's lag behind exp(-C a t)
    # only while C*a*h stays small; at C*a ~ 9 the lag is ~2e-7.
    h = 0.01
    sp = SuppressiveParams(C, a, 4.0)  # epsilon large enough that R never blows up
    traj = simulate(AwarenessState(0.0, 0.0, 0.0, S0), UNFORCED, sp, Constant(I0), h, 5.0)
    gap = np.abs(traj.S - I0 / a)
    slack = 10 * h**4
    assert np.all(np.diff(gap) <= slack)
    assert np.all(gap <= abs(S0 - I0 / a) * np.exp(-C * a * traj.t) + slack)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0.2, 3.0), st.floats(0.1, 2.0),
       st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_energy_non_increasing_when_unforced(alpha, beta, gamma, D0, V0):
    h = 0.01
    dp = DuffingParams(alpha, beta, gamma, 0.0, 1.0)
    traj = simulate(AwarenessState(0.0, D0, V0, 0.0), dp, SP, Zero(), h, 20.0)
    E = energy(traj.D, traj.D_dot, beta, gamma)
    assert np.all(np.diff(E) <= 10 * h**4)


def test_step_halving_convergence():
    dp = DuffingParams(0.5, 1.0, 0.5, 0.3, 0.8)
    s0 = AwarenessState(0.0, 0.5, 0.0, 0.2)
    inp = Sinusoid(1.0, 0.5)
    coarse = simulate(s0, dp, SP, inp, 0.1, 20.0)
    fine = simulate(s0, dp, SP, inp, 0.05, 20.0)
    finer = simulate(s0, dp, SP, inp, 0.025, 20.0)
    e1 = np.max(np.abs(coarse.data[:, 1:4] - fine.data[::2, 1:4]))
    e2 = np.max(np.abs(fine.data[:, 1:4] - finer.data[::2, 1:4]))
    assert e1 / e2 >= 8


class TestInputs:
    def test_schedule_levels_and_edges(self):
        sched = Schedule(((0.0, 1.0, 2.0), (3.0, 4.0, 0.5)))
        assert sched(0.0) == 2.0
        assert sched(0.999) == 2.0
        assert sched(1.0) == 0.0
        assert sched(3.5) == 0.5
        assert sched(10.0) == 0.0

    def test_schedule_rejects_overlap(self):
        with pytest.raises(ValueError):
            Schedule(((0.0, 2.0, 1.0), (1.0, 3.0, 1.0)))
        with pytest.raises(ValueError):
            Schedule(((0.0, 1.0, -1.0),))

    def test_schedule_edge_inside_step_is_sampled_exactly(self):
        # an edge at t = 0.005 lands on the midpoint of the first step
        sp = SuppressiveParams(1.0, 1.0, 1.0)
        sched = Schedule(((0.0, 0.005, 1.0),))
        s = step(AwarenessState(), UNFORCED, sp, sched, 0.01)
        # only the k1 stage sees input 1; later stages just decay
        h = 0.01
        k1, k2, k3, k4 = 1.0, -h / 2, h**2 / 4, -h**3 / 4
        assert s.S == pytest.approx(h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), rel=1e-12)

    def test_sinusoid_non_negative(self):
        sig = Sinusoid(3.0, 2.0, 0.1)
        vals = [sig(t) for t in np.linspace(0, 20, 2001)]
        assert min(vals) >= 0 and max(vals) <= 3.0

    def test_seeded_noise_order_independent(self):
        a = SeededNoise(1.0, 0.5, seed=7, sample_interval=0.1)
        b = SeededNoise(1.0, 0.5, seed=7, sample_interval=0.1)
        late = b(50.0)
        _ = [a(t) for t in np.arange(0, 50.05, 0.1)]
        assert a(50.0) == late
        assert a(0.05) == b(0.0)
        assert all(a(t) >= 0 for t in np.arange(0, 50, 0.1))

    def test_input_from_dict(self):
        assert input_from_dict({"kind": "constant", "level": 2.0})(3.0) == 2.0
        assert input_from_dict({"kind": "zero"})(1.0) == 0.0
        sched = input_from_dict({"kind": "schedule", "segments": [[0, 1, 3]]})
        assert sched(0.5) == 3.0
        with pytest.raises(ValueError):
            input_from_dict({"kind": "white"})

    def test_constant_rejects_negative(self):
        with pytest.raises(ValueError):
            Constant(-1.0)


def test_trajectory_csv_round_trip():
    traj = simulate(AwarenessState(0.0, 1.0, 0.0, 0.0), CHAOTIC, SP, Constant(1.0), 0.01, 2.0)
    text = traj.to_csv()
    assert text.startswith("t,D,D_dot,S,R,I\n")
    assert "\r" not in text
    back = Trajectory.from_csv(text)
    assert back.data.tobytes() == traj.data.tobytes()
    assert back.h == pytest.approx(0.01)


@pytest.mark.parametrize("kw", [{"alpha": -0.1}, {"omega": -1.0}, {"A": math.nan}])
def test_duffing_params_validation(kw):
    with pytest.raises(InvalidStateError):
        DuffingParams(**kw)


@pytest.mark.parametrize("kw", [{"C": 0.0}, {"a": -1.0}, {"epsilon": 0.0}])
def test_suppressive_params_validation(kw):
    with pytest.raises(InvalidStateError):
        SuppressiveParams(**kw)
