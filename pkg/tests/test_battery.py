import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from sdlab.agents import AwareAgent, NonAwareAgent
from sdlab.battery import (
    TASK_KINDS,
    BatteryResult,
    RecuperationCurve,
    TaskSpec,
    UndefinedBaselineError,
    administer,
    battery_csv,
    default_battery,
    degradation,
    recovery_metrics,
    task_score,
)


class FixedCapacity:
    def __init__(self, c):
        self.c = c

    def capacity(self):
        return self.c


def quiet(kind, difficulty=1.0):
    return TaskSpec(kind, difficulty, repetitions=3, noise_std=0.0)


def result(aggregate, kinds=("latency",)):
    return BatteryResult(0.0, list(kinds), [[aggregate]], [aggregate], aggregate, 0)


class TestAdminister:
    def test_full_capacity_scores_one(self):
        tasks = [quiet(k, 2.0) for k in TASK_KINDS]
        r = administer(tasks, FixedCapacity(1.0), seed=1)
        assert r.scores == [1.0, 1.0, 1.0]
        assert r.aggregate == 1.0

    def test_multistage_example(self):
        r = administer([quiet("multistage", 2.0)], FixedCapacity(0.5), seed=1)
        assert r.scores == [0.25]

    def test_latency_and_reconstruction_examples(self):
        assert task_score("latency", 1.0, 0.5) == pytest.approx(0.5)
        assert task_score("latency", 2.0, 0.5) == pytest.approx(1 / 3)
        assert task_score("reconstruction", 1.5, 0.8) == pytest.approx(0.7)
        assert task_score("reconstruction", 3.0, 0.5) == 0.0

    def test_same_seed_is_bit_identical(self):
        a = administer(default_battery(), NonAwareAgent(), seed=42)
        b = administer(default_battery(), NonAwareAgent(), seed=42)
        assert a == b

    def test_different_seed_differs(self):
        a = administer(default_battery(), FixedCapacity(0.7), seed=1)
        b = administer(default_battery(), FixedCapacity(0.7), seed=2)
        assert a.aggregate != b.aggregate

    def test_seed_isolation(self):
        agent = AwareAgent(entropy_seed=7)
        for _ in range(500):
            agent.tick(0.0, 0.01)
        before = (agent.dyn, agent.damage, agent.R, agent._peak)
        administer(default_battery(), agent, seed=3)
        assert (agent.dyn, agent.damage, agent.R, agent._peak) == before

    def test_raw_repetitions_recorded(self):
        r = administer([TaskSpec("latency", repetitions=4)], FixedCapacity(0.9), seed=5, t_admin=12.5)
        assert len(r.raw[0]) == 4
        assert r.scores[0] == pytest.approx(np.mean(r.raw[0]))
        assert r.t_admin == 12.5 and r.seed == 5

    @given(st.floats(1e-6, 1.0), st.floats(0.0, 2.0), st.integers(0, 2**32 - 1))
    def test_aggregate_bounds(self, c, noise, seed):
        tasks = [TaskSpec(k, 1.5, 3, noise) for k in TASK_KINDS]
        r = administer(tasks, FixedCapacity(c), seed)
        assert all(0 <= s <= 1 for s in r.scores)
        assert all(0 <= x <= 1 for reps in r.raw for x in reps)
        assert 0 <= r.aggregate <= 1
        assert r.aggregate == pytest.approx(np.mean(r.scores))


@pytest.mark.parametrize("kind", TASK_KINDS)
@given(lo=st.floats(1e-3, 1.0), hi=st.floats(1e-3, 1.0), d=st.floats(0.1, 5.0))
def test_score_monotone_in_capacity(kind, lo, hi, d):
    assume(lo < hi)
    assert task_score(kind, d, lo) <= task_score(kind, d, hi)


@pytest.mark.parametrize("kind", ["latency", "multistage"])
def test_score_strictly_increasing_inside_unit_interval(kind):
    cs = np.linspace(0.01, 0.99, 99)
    s = [task_score(kind, 1.5, c) for c in cs]
    assert all(b > a for a, b in zip(s, s[1:]))


def test_reconstruction_strict_where_positive():
    cs = np.linspace(0.4, 0.99, 60)
    s = [task_score("reconstruction", 1.5, c) for c in cs]
    assert all(b > a for a, b in zip(s, s[1:]))


class TestTaskSpec:
    def test_minimum_repetitions(self):
        with pytest.raises(ValueError):
            TaskSpec("latency", repetitions=2)

    def test_negative_noise(self):
        with pytest.raises(ValueError):
            TaskSpec("latency", noise_std=-0.1)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            TaskSpec("stroop")
        with pytest.raises(ValueError):
            task_score("stroop", 1.0, 0.5)


class TestDegradation:
    def test_identical(self):
        assert degradation(result(0.8), result(0.8)) == 0

    def test_arithmetic(self):
        assert degradation(result(0.9), result(0.72)) == pytest.approx(0.2)

    def test_may_be_negative(self):
        assert degradation(result(0.5), result(0.6)) < 0

    def test_zero_baseline(self):
        with pytest.raises(UndefinedBaselineError):
            degradation(result(0.0), result(0.5))

    def test_task_list_mismatch(self):
        with pytest.raises(ValueError):
            degradation(result(0.9), result(0.9, kinds=("multistage",)))


class TestRecoveryMetrics:
    def test_monotone_full_recovery(self):
        m = recovery_metrics(RecuperationCurve([(0, 0.6), (1, 0.7), (2, 0.8), (3, 0.9)], 0.9))
        assert m.trend == pytest.approx(1.0)
        assert m.recovered_fraction == pytest.approx(1.0)
        assert m.time_to_90pct == 3

    def test_flat(self):
        m = recovery_metrics(RecuperationCurve([(0, 0.6), (1, 0.6), (2, 0.6)], 0.9))
        assert m.trend == 0
        assert m.recovered_fraction == 0
        assert m.time_to_90pct is None

    def test_fraction_clamped(self):
        m = recovery_metrics(RecuperationCurve([(0, 0.8), (1, 0.9), (2, 1.0)], 0.85))
        assert m.recovered_fraction == 1.5
        m = recovery_metrics(RecuperationCurve([(0, 0.6), (1, 0.5), (2, 0.4)], 0.9))
        assert m.recovered_fraction == 0.0 and m.trend == pytest.approx(-1.0)

    def test_no_degradation_not_applicable(self):
        m = recovery_metrics(RecuperationCurve([(0, 0.9), (1, 0.9), (2, 0.95)], 0.9))
        assert not m.applicable
        assert m.recovered_fraction is None

    def test_too_short(self):
        with pytest.raises(ValueError):
            recovery_metrics(RecuperationCurve([(0, 0.6), (1, 0.7)], 0.9))

    def test_times_strictly_increasing(self):
        with pytest.raises(ValueError):
            RecuperationCurve([(0, 0.6), (0, 0.7), (1, 0.8)], 0.9)


def test_battery_csv():
    r = administer([quiet("latency"), quiet("multistage")], FixedCapacity(1.0), seed=1, t_admin=2.5)
    text = battery_csv([("baseline", r)])
    assert text.splitlines() == [
        "slot,t_admin,task_kind,score,aggregate",
        "baseline,2.5,latency,1,1",
        "baseline,2.5,multistage,1,1",
    ]
