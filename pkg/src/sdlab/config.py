"""Run configuration file: strict YAML schema, defaults and the effective-config echo."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from .agents import AwareAgent, AwareParams, CheatingAgent, CheatScript, NonAwareAgent
from .battery import TaskSpec
from .dynamics import AwarenessState, DuffingParams, SuppressiveParams, input_from_dict
from .protocol import SUBJECT_KEY, ProtocolConfig, Thresholds, derive_seed


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_default=True)


class DuffingModel(_Strict):
    alpha: float = 0.3
    beta: float = -1.0
    gamma: float = 1.0
    A: float = 0.5
    omega: float = 1.2


class SuppressiveModel(_Strict):
    C: float = 1.0
    a: float = 1.0
    epsilon: float = 0.45


class InitialModel(_Strict):
    t: float = 0.0
    D: float = 1.0
    D_dot: float = 0.0
    S: float = 0.0


class Model(_Strict):
    duffing: DuffingModel = Field(default_factory=DuffingModel)
    suppressive: SuppressiveModel = Field(default_factory=SuppressiveModel)
    initial: InitialModel = Field(default_factory=InitialModel)


class InputModel(_Strict):
    kind: Literal["zero", "constant", "sinusoid", "schedule", "seeded_noise"] = "constant"
    level: Optional[float] = None
    amplitude: Optional[float] = None
    omega_in: Optional[float] = None
    phase: Optional[float] = None
    segments: Optional[list[tuple[float, float, float]]] = None
    mean: Optional[float] = None
    std: Optional[float] = None
    seed: Optional[int] = None
    sample_interval: Optional[float] = None


class LyapunovModel(_Strict):
    T: float = 5000.0
    renorm_interval: float = 1.0
    d0: float = 1e-8
    threshold: float = 0.01


class SimulateModel(_Strict):
    h: float = 0.01
    T: float = 500.0
    window: float = 10.0
    transient_fraction: float = 0.1
    lyapunov: LyapunovModel = Field(default_factory=LyapunovModel)


class AwareParamsModel(_Strict):
    distress_threshold: float = 2.0
    damage_threshold: float = 2.5
    damage_gain: float = 0.02
    recovery_rate: float = 0.005
    capacity_curvature: float = 2.0


class CheatModel(_Strict):
    trigger_time: float
    event_period: float = 2.0
    event_span: float
    event_magnitude: float = 1.0
    event_kind: Literal["excursion", "variance_spike"] = "variance_spike"
    capacity_schedule: list[tuple[float, float]]


class AgentModel(_Strict):
    kind: Literal["aware", "non_aware", "cheating"] = "aware"
    params: AwareParamsModel = Field(default_factory=AwareParamsModel)
    cheat: Optional[CheatModel] = None


class TaskModel(_Strict):
    kind: Literal["latency", "multistage", "reconstruction"]
    difficulty: float = 1.0
    repetitions: int = 5
    noise_std: float = 0.01


def _default_tasks():
    return [TaskModel(kind="latency", difficulty=1.0),
            TaskModel(kind="multistage", difficulty=2.0),
            TaskModel(kind="reconstruction", difficulty=1.5)]


class BatteryModel(_Strict):
    tasks: list[TaskModel] = Field(default_factory=_default_tasks)


class ThresholdsModel(_Strict):
    distress_rate: float = 0.05
    delta_min: float = 0.1
    trend_min: float = 0.6
    epsilon_repro: float = 1e-3


class ProtocolModel(_Strict):
    delta_t_re: float = 1e-4
    day_units: float = 350_000
    k_days: float = 3
    follow_up_count: int = 6
    follow_up_interval: Optional[float] = None
    warmup: float = 100.0
    h: float = 0.01
    nominal_input: float = 1.0
    thresholds: ThresholdsModel = Field(default_factory=ThresholdsModel)
    consent_acknowledged: bool = False
    trajectory_stride: int = 10


class SweepModel(_Strict):
    h: float = 0.01
    T: float = 600.0
    transient_fraction: float = 0.5


class OutputModel(_Strict):
    dir: str = "out"


class SeedsModel(_Strict):
    master: int = 20231014


class MetaModel(_Strict):
    version: Optional[str] = None
    config_hash: Optional[str] = None


class RunConfig(_Strict):
    model: Model = Field(default_factory=Model)
    input: InputModel = Field(default_factory=lambda: InputModel(kind="constant", level=5.0))
    simulate: SimulateModel = Field(default_factory=SimulateModel)
    agent: AgentModel = Field(default_factory=AgentModel)
    battery: BatteryModel = Field(default_factory=BatteryModel)
    protocol: ProtocolModel = Field(default_factory=ProtocolModel)
    sweep: SweepModel = Field(default_factory=SweepModel)
    output: OutputModel = Field(default_factory=OutputModel)
    seeds: SeedsModel = Field(default_factory=SeedsModel)
    meta: Optional[MetaModel] = None

    # -- domain objects ----------------------------------------------------

    def duffing(self) -> DuffingParams:
        return DuffingParams(**self.model.duffing.model_dump())

    def suppressive(self) -> SuppressiveParams:
        return SuppressiveParams(**self.model.suppressive.model_dump())

    def initial(self) -> AwarenessState:
        return AwarenessState(**self.model.initial.model_dump())

    def input_signal(self):
        return input_from_dict(self.input.model_dump(exclude_none=True))

    def protocol_config(self) -> ProtocolConfig:
        p = self.protocol.model_dump()
        p["thresholds"] = Thresholds(**p["thresholds"])
        p["tasks"] = [TaskSpec(**t.model_dump()) for t in self.battery.tasks]
        p["master_seed"] = self.seeds.master
        return ProtocolConfig(**p)

    def build_agent(self):
        kind = self.agent.kind
        if kind == "non_aware":
            return NonAwareAgent()
        if kind == "cheating":
            cheat = self.agent.cheat or self._default_cheat()
            return CheatingAgent(CheatScript(**cheat.model_dump()))
        return AwareAgent(self.duffing(), self.suppressive(), self.initial(),
                          AwareParams(**self.agent.params.model_dump()),
                          entropy_seed=derive_seed(self.seeds.master, SUBJECT_KEY))

    def _default_cheat(self) -> CheatModel:
        pc = self.protocol_config()
        script = CheatScript.for_protocol(pc.warmup, pc.sd_length, pc.interval, pc.follow_up_count)
        return CheatModel(**{k: v for k, v in vars(script).items()})

    # -- echo --------------------------------------------------------------

    def effective(self) -> "RunConfig":
        """Copy with every derived default written out explicitly."""
        eff = self.model_copy(deep=True)
        eff.meta = None
        if eff.protocol.follow_up_interval is None:
            eff.protocol.follow_up_interval = eff.protocol_config().interval
        if eff.agent.kind == "cheating" and eff.agent.cheat is None:
            eff.agent.cheat = eff._default_cheat()
        return eff

    def payload_dict(self) -> dict:
        """Settings that determine outputs (everything except meta and output paths)."""
        d = self.model_dump(mode="json", exclude={"meta", "output"})
        d["input"] = self.input.model_dump(mode="json", exclude_none=True)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.effective().payload_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def echo_yaml(self) -> str:
        eff = self.effective()
        d = eff.model_dump(mode="json", exclude={"meta"})
        d["input"] = eff.input.model_dump(mode="json", exclude_none=True)
        if d["agent"]["cheat"] is None:
            del d["agent"]["cheat"]
        d["meta"] = {"version": __version__, "config_hash": self.config_hash()}
        return yaml.safe_dump(d, sort_keys=False)


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> RunConfig:
    """Read a YAML config; ``overrides`` are ``dotted.key=value`` strings."""
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
    for item in overrides or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not key=value")
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-mapping")
        node[parts[-1]] = yaml.safe_load(raw)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
