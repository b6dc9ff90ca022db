"""Hebb-style deprivation protocol with a twin control, and its verdict.

A run goes through these phases:

1. warm-up under nominal input
2. baseline battery
3. deprivation (input 0) for the scheduled duration, with distress monitoring
4. reconnection and an immediate post battery
5. ``follow_up_count`` further batteries, one every ``follow_up_interval``
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .agents import Agent, AgentFailure, AgentKind, DistressEvent
from .battery import (
    BatteryResult,
    RecuperationCurve,
    TaskSpec,
    administer,
    default_battery,
    degradation,
    recovery_metrics,
)

DAY_UNITS = 350_000

SUBJECT_KEY = 1_000_001
TWIN_KEY = 1_000_002


class ConsentError(RuntimeError):
    """The run was refused because consent was not acknowledged."""


class IncomparableRecordsError(ValueError):
    pass


def sd_duration(delta_t_re: float, k_days: float = 3, day_units: float = DAY_UNITS) -> float:
    """Deprivation length: ``k_days`` subject-days of ``day_units`` reaction periods each."""
    if not delta_t_re > 0:
        raise ValueError("delta_t_re must be > 0")
    if k_days < 1:
        raise ValueError("k_days must be >= 1")
    return k_days * day_units * delta_t_re


def derive_seed(master_seed: int, key: int) -> int:
    return int(np.random.SeedSequence([int(master_seed), int(key)]).generate_state(1)[0])


@dataclass
class Thresholds:
    distress_rate: float = 0.05
    delta_min: float = 0.1
    trend_min: float = 0.6
    epsilon_repro: float = 1e-3


@dataclass
class ProtocolConfig:
    delta_t_re: float = 1e-4
    day_units: float = DAY_UNITS
    k_days: float = 3
    follow_up_count: int = 6
    follow_up_interval: float | None = None
    warmup: float = 100.0
    h: float = 0.01
    nominal_input: float = 1.0
    tasks: list[TaskSpec] = field(default_factory=default_battery)
    thresholds: Thresholds = field(default_factory=Thresholds)
    master_seed: int = 20231014
    consent_acknowledged: bool = False
    trajectory_stride: int = 10

    def __post_init__(self):
        for name in ("delta_t_re", "day_units", "k_days", "warmup", "h", "nominal_input"):
            setattr(self, name, float(getattr(self, name)))
        if self.follow_up_interval is not None:
            self.follow_up_interval = float(self.follow_up_interval)
        if not self.delta_t_re > 0:
            raise ValueError("delta_t_re must be > 0")
        if self.k_days < 1:
            raise ValueError("k_days must be >= 1")
        if self.follow_up_count < 3:
            raise ValueError("follow_up_count must be >= 3")
        if not (self.h > 0 and self.warmup >= 0 and self.nominal_input > 0):
            raise ValueError("need h > 0, warmup >= 0 and nominal_input > 0")

    @property
    def sd_length(self) -> float:
        return sd_duration(self.delta_t_re, self.k_days, self.day_units)

    @property
    def interval(self) -> float:
        return self.sd_length if self.follow_up_interval is None else self.follow_up_interval

    def steps(self, duration: float) -> int:
        n = round(duration / self.h)
        if abs(n * self.h - duration) > 1e-9 * max(1.0, duration):
            raise ValueError(f"duration {duration} is not a whole number of steps h={self.h}")
        return n

    def to_dict(self) -> dict:
        d = asdict(self)
        d["follow_up_interval"] = self.interval
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ProtocolRecord:
    agent: dict
    config_hash: str
    seeds: dict
    baseline: BatteryResult | None = None
    sd_window: tuple[float, float] | None = None
    events: list[DistressEvent] = field(default_factory=list)
    trajectory: np.ndarray | None = None
    post: BatteryResult | None = None
    follow_ups: list[BatteryResult] = field(default_factory=list)
    aborted: bool = False
    failure: str | None = None

    @property
    def kind(self) -> AgentKind:
        return AgentKind(self.agent["kind"])

    def slots(self) -> list[tuple[str, BatteryResult]]:
        out = []
        if self.baseline is not None:
            out.append(("baseline", self.baseline))
        if self.post is not None:
            out.append(("post", self.post))
        out.extend((f"follow_up_{i + 1}", r) for i, r in enumerate(self.follow_ups))
        return out

    def curve(self) -> RecuperationCurve:
        pts = [(self.post.t_admin, self.post.aggregate)]
        pts += [(r.t_admin, r.aggregate) for r in self.follow_ups]
        return RecuperationCurve(pts, self.baseline.aggregate)

    def sd_events(self) -> list[DistressEvent]:
        start, end = self.sd_window
        return [e for e in self.events if start <= e.t < end]


def run_protocol(agent: Agent, config: ProtocolConfig, entropy_seed: int | None = None) -> ProtocolRecord:
    """Run the whole protocol on a fresh ``agent``.

    If the agent fails partway, the returned record has ``aborted`` set and
    holds whatever was gathered before the failure.
    """
    if not config.consent_acknowledged:
        raise ConsentError("consent_acknowledged is not set; refusing to deprive the subject")

    h = config.h
    n_warm = config.steps(config.warmup)
    n_sd = config.steps(config.sd_length)
    n_fu = config.steps(config.interval)
    seeds = {"master": config.master_seed,
             "battery": [derive_seed(config.master_seed, slot) for slot in range(config.follow_up_count + 2)]}
    if entropy_seed is not None:
        seeds["entropy"] = entropy_seed
    record = ProtocolRecord(agent.describe(), config.config_hash(), seeds)

    aware = agent.kind is AgentKind.AWARE
    stride = max(1, config.trajectory_stride)
    rows = []
    clock = {"i": 0}

    def sample(level):
        rows.append((clock["i"] * h, agent.dyn.D, agent.dyn.D_dot, agent.dyn.S, agent.R, level))

    def advance(n, level):
        for _ in range(n):
            record.events.extend(agent.tick(level, h))
            clock["i"] += 1
            if aware and clock["i"] % stride == 0:
                sample(level)

    def battery(slot):
        return administer(config.tasks, agent, seeds["battery"][slot], t_admin=clock["i"] * h)

    if aware:
        sample(config.nominal_input)
    try:
        advance(n_warm, config.nominal_input)
        record.baseline = battery(0)
        sd_start = clock["i"] * h
        record.sd_window = (sd_start, (clock["i"] + n_sd) * h)
        advance(n_sd, 0.0)
        record.post = battery(1)
        for k in range(config.follow_up_count):
            advance(n_fu, config.nominal_input)
            record.follow_ups.append(battery(k + 2))
    except AgentFailure as exc:
        record.aborted = True
        record.failure = str(exc)
    if aware:
        record.trajectory = np.array(rows, dtype=float).reshape(-1, 6)
    return record


@dataclass
class Verdict:
    a_distress: bool
    b_degradation: bool
    c_recuperation: bool
    d_irreproducible: bool
    metrics: dict
    config_hash: str
    seeds: dict

    @property
    def passed(self) -> bool:
        return self.a_distress and self.b_degradation and self.c_recuperation and self.d_irreproducible

    def to_dict(self) -> dict:
        return {
            "criteria": {"a": self.a_distress, "b": self.b_degradation,
                         "c": self.c_recuperation, "d": self.d_irreproducible},
            "pass": self.passed,
            "metrics": self.metrics,
            "config_hash": self.config_hash,
            "seeds": self.seeds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _single_criteria(record: ProtocolRecord, config: ProtocolConfig):
    th = config.thresholds
    start, end = record.sd_window
    rate = len(record.sd_events()) / (end - start)
    deg = degradation(record.baseline, record.post)
    rec = recovery_metrics(record.curve())
    a = rate >= th.distress_rate
    b = deg >= th.delta_min
    c = rec.applicable and rec.trend >= th.trend_min and rec.recovered_fraction > 0.25
    metrics = {
        "distress_rate": rate,
        "degradation": deg,
        "trend": rec.trend,
        "recovered_fraction": rec.recovered_fraction,
        "time_to_90pct": rec.time_to_90pct,
    }
    return (a, b, c), metrics


def twin_distance(record: ProtocolRecord, twin: ProtocolRecord) -> float:
    """Largest aggregate-score gap over aligned battery slots."""
    pairs = zip(record.slots(), twin.slots())
    return max(abs(r.aggregate - q.aggregate) for (_, r), (_, q) in pairs)


def evaluate(record: ProtocolRecord, twin_record: ProtocolRecord, config: ProtocolConfig) -> Verdict:
    """Score criteria a-d for a subject and its twin."""
    for rec in (record, twin_record):
        if rec.aborted or rec.post is None or len(rec.follow_ups) != config.follow_up_count:
            raise IncomparableRecordsError("cannot evaluate an incomplete record")
    want = config.config_hash()
    if record.config_hash != want or twin_record.config_hash != want:
        raise IncomparableRecordsError("records were not produced under this config")
    if record.agent != twin_record.agent:
        raise IncomparableRecordsError("twin record describes a different agent")

    own, metrics = _single_criteria(record, config)
    twin_own, twin_metrics = _single_criteria(twin_record, config)
    distance = twin_distance(record, twin_record)
    same_pattern = own == twin_own
    d = same_pattern and distance > config.thresholds.epsilon_repro
    if record.kind is AgentKind.AWARE:
        d = d and [e.t for e in record.events] != [e.t for e in twin_record.events]

    metrics = dict(metrics)
    metrics["twin_distance"] = distance
    metrics["twin"] = twin_metrics
    metrics["twin_pattern_match"] = same_pattern
    seeds = {"subject": record.seeds, "twin": twin_record.seeds}
    return Verdict(*own, d, metrics, want, seeds)


def run_twin_experiment(agent: Agent, config: ProtocolConfig, twin_seed: int | None = None,
                        subject_seed: int | None = None):
    """Clone ``agent`` before it is touched, run both, and evaluate.

    Returns ``(record, twin_record, verdict)``.
    """
    if twin_seed is None:
        twin_seed = derive_seed(config.master_seed, TWIN_KEY)
    twin = agent.clone_twin(twin_seed)
    subject_entropy = getattr(agent, "entropy_seed", subject_seed)
    twin_entropy = getattr(twin, "entropy_seed", None)
    record = run_protocol(agent, config, subject_entropy)
    twin_record = run_protocol(twin, config, twin_entropy)
    if record.aborted or twin_record.aborted:
        return record, twin_record, None
    return record, twin_record, evaluate(record, twin_record, config)

