"""Machine-analog cognitive battery: latency, multi-stage and reconstruction tasks."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

TASK_KINDS = ("latency", "multistage", "reconstruction")


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    difficulty: float = 1.0
    repetitions: int = 5
    noise_std: float = 0.01

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        if not self.difficulty > 0:
            raise ValueError("difficulty must be > 0")
        if self.repetitions < 3:
            raise ValueError("a task needs at least 3 repetitions")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


def default_battery() -> list[TaskSpec]:
    return [
        TaskSpec("latency", difficulty=1.0),
        TaskSpec("multistage", difficulty=2.0),
        TaskSpec("reconstruction", difficulty=1.5),
    ]


def task_score(kind: str, difficulty: float, c: float) -> float:
    """Noise-free normalized score of one task at capacity ``c`` in (0, 1]."""
    if kind == "latency":
        # resolution time grows like 1/c; score is relative speed
        return 1.0 / (1.0 + difficulty * (1.0 / c - 1.0))
    if kind == "multistage":
        return c**difficulty
    if kind == "reconstruction":
        return max(0.0, 1.0 - difficulty * (1.0 - c))
    raise ValueError(f"unknown task kind {kind!r}")


@dataclass
class BatteryResult:
    t_admin: float
    kinds: list[str]
    raw: list[list[float]]
    scores: list[float]
    aggregate: float
    seed: int

    def rows(self, slot):
        return [(slot, self.t_admin, k, s, self.aggregate) for k, s in zip(self.kinds, self.scores)]


def administer(tasks, agent, seed: int, t_admin: float = 0.0) -> BatteryResult:
    """Run the battery once against ``agent``'s current capacity.

    Only the capacity is read, so the agent is left untouched. Noise comes
    from a generator seeded with ``seed`` alone.
    """
    c = agent.capacity()
    rng = np.random.default_rng(seed)
    raw, scores = [], []
    for task in tasks:
        base = task_score(task.kind, task.difficulty, c)
        reps = []
        for _ in range(task.repetitions):
            noise = float(rng.normal(0.0, task.noise_std)) if task.noise_std > 0 else 0.0
            reps.append(min(1.0, max(0.0, base + noise)))
        raw.append(reps)
        scores.append(math.fsum(reps) / len(reps))
    aggregate = math.fsum(scores) / len(scores) if scores else 0.0
    return BatteryResult(t_admin, [t.kind for t in tasks], raw, scores, aggregate, seed)


class UndefinedBaselineError(ValueError):
    pass


def degradation(baseline: BatteryResult, post: BatteryResult) -> float:
    if baseline.kinds != post.kinds:
        raise ValueError("baseline and post batteries used different task lists")
    if baseline.aggregate == 0:
        raise UndefinedBaselineError("baseline aggregate is 0")
    return (baseline.aggregate - post.aggregate) / baseline.aggregate


@dataclass
class RecuperationCurve:
    points: list[tuple[float, float]]
    baseline: float

    def __post_init__(self):
        ts = [t for t, _ in self.points]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("recuperation times must be strictly increasing")

    @property
    def scores(self):
        return [s for _, s in self.points]


@dataclass
class RecoveryMetrics:
    trend: float
    recovered_fraction: float | None
    time_to_90pct: float | None
    applicable: bool = True
    notes: list[str] = field(default_factory=list)


def recovery_metrics(curve: RecuperationCurve) -> RecoveryMetrics:
    """Trend (Spearman correlation of score against slot index), recovered
    fraction of the lost score, and elapsed time until 90% of it is back.

    When the first point was not below baseline there is nothing to recover;
    the result is then flagged ``applicable=False`` with no fraction.
    """
    scores = curve.scores
    if len(scores) < 3:
        raise ValueError("a recuperation curve needs at least 3 points")
    if len(set(scores)) == 1:
        trend = 0.0
    else:
        trend = float(spearmanr(np.arange(len(scores)), scores).statistic)

    first, last = scores[0], scores[-1]
    lost = curve.baseline - first
    if not lost > 0:
        return RecoveryMetrics(trend, None, None, applicable=False,
                               notes=["no degradation at the first point"])
    fraction = min(1.5, max(0.0, (last - first) / lost))
    t0 = curve.points[0][0]
    t90 = next((t - t0 for t, s in curve.points[1:] if s - first >= 0.9 * lost), None)
    return RecoveryMetrics(trend, fraction, t90)


def battery_csv(slots) -> str:
    """``slots`` is a sequence of (slot_name, BatteryResult)."""
    buf = io.StringIO()
    buf.write("slot,t_admin,task_kind,score,aggregate\n")
    for slot, result in slots:
        for row in result.rows(slot):
            buf.write(f"{row[0]},{row[1]:.17g},{row[2]},{row[3]:.17g},{row[4]:.17g}\n")
    return buf.getvalue()
