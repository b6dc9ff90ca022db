"""Simulated test subjects.

Three archetypes are provided:

* :class:`AwareAgent` couples its cognition to the awareness dynamics.
  Deprivation drives large response excursions that accumulate damage;
  restored input lets the damage heal.
* :class:`NonAwareAgent` is a stable machine that ignores its inputs.
* :class:`CheatingAgent` fakes distress from an internal clock. It exists as
  a negative control for the twin check.
"""

from __future__ import annotations

import copy
import enum
import io
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .dynamics import (
    AwarenessState,
    Constant,
    DuffingParams,
    SuppressiveParams,
    response,
    step,
)

TWIN_PERTURBATION = 1e-6


class AgentKind(str, enum.Enum):
    AWARE = "aware"
    NON_AWARE = "non_aware"
    CHEATING = "cheating"


class AgentFailure(RuntimeError):
    """An agent could not be advanced; ``t`` is the agent time of the failure."""

    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


@dataclass(frozen=True)
class DistressEvent:
    t: float
    magnitude: float
    kind: str = "excursion"

    def __post_init__(self):
        if not self.magnitude > 0:
            raise ValueError("distress magnitude must be > 0")
        if self.kind not in ("excursion", "variance_spike"):
            raise ValueError(f"unknown distress kind {self.kind!r}")


def events_csv(events) -> str:
    buf = io.StringIO()
    buf.write("t,kind,magnitude\n")
    for ev in events:
        buf.write(f"{ev.t:.17g},{ev.kind},{ev.magnitude:.17g}\n")
    return buf.getvalue()


class Agent:
    kind: AgentKind

    def tick(self, input_level: float, dt: float) -> list[DistressEvent]:
        raise NotImplementedError

    def capacity(self) -> float:
        raise NotImplementedError

    def clone_twin(self, twin_entropy_seed: int) -> "Agent":
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError

    @staticmethod
    def _check_tick(input_level, dt):
        if not dt > 0:
            raise ValueError("dt must be > 0")
        if not (math.isfinite(input_level) and input_level >= 0):
            raise ValueError("input_level must be finite and >= 0")


@dataclass
class AwareParams:
    """Damage and distress constants of the aware agent (simulation units)."""

    distress_threshold: float = 2.0
    damage_threshold: float = 2.5
    damage_gain: float = 0.02
    recovery_rate: float = 0.005
    capacity_curvature: float = 2.0

    def __post_init__(self):
        if self.damage_gain < 0 or self.recovery_rate < 0 or self.capacity_curvature <= 0:
            raise ValueError("damage_gain, recovery_rate must be >= 0 and capacity_curvature > 0")


class AwareAgent(Agent):
    """Subject whose cognitive capacity is driven by the awareness dynamics.

    On each tick the state is advanced by one RK4 step under the given input.
    While the input is zero, ``damage`` grows in proportion to how far
    ``|R|`` exceeds the damage threshold. While input is present, damage
    decays exponentially at ``recovery_rate``. Capacity is
    ``1 / (1 + capacity_curvature * damage)``.

    One distress event is logged per excursion of ``|R|`` above the distress
    threshold. It is stamped at the peak of the excursion and emitted when
    the excursion ends.

    The only randomness is a uniform draw in ``[-1e-6, 1e-6]`` added to the
    initial displacement, taken from ``entropy_seed``.
    """

    kind = AgentKind.AWARE

    def __init__(self, dp: DuffingParams | None = None, sp: SuppressiveParams | None = None,
                 initial: AwarenessState | None = None, params: AwareParams | None = None,
                 entropy_seed: int = 0):
        self.dp = dp or DuffingParams()
        self.sp = sp or SuppressiveParams()
        self.params = params or AwareParams()
        self.nominal_initial = initial or AwarenessState(0.0, 1.0, 0.0, 0.0)
        self.entropy_seed = int(entropy_seed)
        rng = np.random.default_rng(self.entropy_seed)
        self.perturbation = float(rng.uniform(-TWIN_PERTURBATION, TWIN_PERTURBATION))
        self.dyn = replace(self.nominal_initial, D=self.nominal_initial.D + self.perturbation)
        self.damage = 0.0
        self.R = response(self.dyn.D, self.dyn.S, self.sp.epsilon, self.dyn.t)
        self._peak = None  # (t, |R|) of the excursion in progress

    @property
    def t(self) -> float:
        return self.dyn.t

    def capacity(self) -> float:
        return 1.0 / (1.0 + self.params.capacity_curvature * self.damage)

    def tick(self, input_level, dt):
        self._check_tick(input_level, dt)
        try:
            self.dyn = step(self.dyn, self.dp, self.sp, Constant(input_level), dt)
            self.R = response(self.dyn.D, self.dyn.S, self.sp.epsilon, self.dyn.t)
        except Exception as exc:  # DivergenceError, SingularityError
            raise AgentFailure(f"aware agent failed at t={self.dyn.t!r}: {exc}", self.dyn.t) from exc

        p = self.params
        level = abs(self.R)
        if input_level == 0:
            self.damage += p.damage_gain * max(0.0, level - p.damage_threshold) * dt
        elif p.recovery_rate > 0:
            self.damage *= math.exp(-p.recovery_rate * dt)

        events = []
        if level > p.distress_threshold:
            if self._peak is None or level > self._peak[1]:
                self._peak = (self.dyn.t, level)
        elif self._peak is not None:
            events.append(DistressEvent(self._peak[0], self._peak[1] - p.distress_threshold))
            self._peak = None
        return events

    def clone_twin(self, twin_entropy_seed):
        return AwareAgent(self.dp, self.sp, self.nominal_initial, replace(self.params),
                          twin_entropy_seed)

    def describe(self):
        return {
            "kind": self.kind.value,
            "duffing": asdict(self.dp),
            "suppressive": asdict(self.sp),
            "initial": asdict(self.nominal_initial),
            "params": asdict(self.params),
        }


class NonAwareAgent(Agent):
    """Stable machine: full capacity, no distress, whatever the input."""

    kind = AgentKind.NON_AWARE

    def tick(self, input_level, dt):
        self._check_tick(input_level, dt)
        return []

    def capacity(self):
        return 1.0

    def clone_twin(self, twin_entropy_seed):
        return NonAwareAgent()

    def describe(self):
        return {"kind": self.kind.value}


@dataclass
class CheatScript:
    """Clock-driven distress script.

    After ``trigger_time`` on the internal clock, a distress event of
    ``event_magnitude`` fires every ``event_period`` for ``event_span`` time
    units. Capacity follows ``capacity_schedule``, a step function of the
    offset since the trigger. Before the trigger, capacity is 1.
    """

    trigger_time: float = 110.0
    event_period: float = 2.0
    event_span: float = 90.0
    event_magnitude: float = 1.0
    event_kind: str = "variance_spike"
    capacity_schedule: list = field(default_factory=lambda: [[0.0, 0.6]])

    def __post_init__(self):
        self.capacity_schedule = sorted([float(o), float(c)] for o, c in self.capacity_schedule)
        if any(not 0 < c <= 1 for _, c in self.capacity_schedule):
            raise ValueError("scripted capacities must lie in (0, 1]")
        if self.event_period <= 0:
            raise ValueError("event_period must be > 0")

    @classmethod
    def for_protocol(cls, sd_start, sd_length, follow_up_interval, follow_up_count=6):
        """Script that shows distress inside the deprivation window and fakes a recovery.

        The script only knows the scheduled times. It does not respond to
        the actual input.
        """
        trigger = sd_start + 0.1 * sd_length
        sd_end_offset = sd_start + sd_length - trigger
        schedule = [[0.0, 0.6]]
        for k in range(1, follow_up_count + 1):
            # lands half an interval before follow-up k
            schedule.append([sd_end_offset + (k - 0.5) * follow_up_interval,
                             min(1.0, 0.6 + 0.4 * k / follow_up_count)])
        return cls(trigger_time=trigger, event_period=2.0, event_span=0.8 * sd_length,
                   event_magnitude=1.0, capacity_schedule=schedule)


class CheatingAgent(Agent):
    """Clock-scripted impostor; a pure function of elapsed time."""

    kind = AgentKind.CHEATING

    def __init__(self, script: CheatScript | None = None):
        self.script = script or CheatScript()
        self.t = 0.0
        self._ticks = 0
        self._fired = 0

    def _offset(self):
        return self.t - self.script.trigger_time

    def tick(self, input_level, dt):
        self._check_tick(input_level, dt)
        self.t += dt
        s = self.script
        off = self._offset()
        events = []
        # k-th event is due at trigger + k * period, for offsets inside the span
        while (self._fired * s.event_period <= off
               and self._fired * s.event_period < s.event_span):
            t_ev = s.trigger_time + self._fired * s.event_period
            events.append(DistressEvent(t_ev, s.event_magnitude, s.event_kind))
            self._fired += 1
        return events

    def capacity(self):
        off = self._offset()
        if off < 0:
            return 1.0
        value = 1.0
        for o, c in self.script.capacity_schedule:
            if o <= off:
                value = c
        return value

    def clone_twin(self, twin_entropy_seed):
        return CheatingAgent(copy.deepcopy(self.script))

    def describe(self):
        return {"kind": self.kind.value, "script": asdict(self.script)}


def make_agent(kind: str | AgentKind, **kwargs) -> Agent:
    kind = AgentKind(kind)
    if kind is AgentKind.AWARE:
        return AwareAgent(**kwargs)
    if kind is AgentKind.NON_AWARE:
        return NonAwareAgent()
    return CheatingAgent(**kwargs)

