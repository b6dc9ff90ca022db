"""Awareness dynamics: a forced Duffing baseline, a suppressive input filter,
and the composed response.

The system integrated here is

    D'' = -alpha D' - beta D - gamma D**3 + A sin(omega t)
    S'  = C (I(t) - a S)
    R   = S + D / (epsilon + S)

with a fixed-step classical Runge-Kutta scheme so that every trajectory is
bit-reproducible.
"""

from __future__ import annotations

import bisect
import io
import math
from dataclasses import dataclass, field

import numpy as np

DIVERGENCE_LIMIT = 1e12
DEFAULT_STEP = 0.01
DEFAULT_MAX_STEPS = 10_000_000

TRAJECTORY_COLUMNS = ("t", "D", "D_dot", "S", "R", "I")


class DynamicsError(Exception):
    """Base class for numerical failures of the awareness system."""


class InvalidStateError(DynamicsError, ValueError):
    pass


class SingularityError(DynamicsError):
    """Raised when epsilon + S reaches zero and R is undefined."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class DivergenceError(DynamicsError):
    """Integration produced a non-finite or runaway value.

    ``state`` is the last finite state, ``step_index`` the number of steps that
    completed successfully and ``partial`` (when raised from :func:`simulate`)
    the trajectory up to that point.
    """

    def __init__(self, message, state=None, step_index=None, partial=None):
        super().__init__(message)
        self.state = state
        self.step_index = step_index
        self.partial = partial


def _check_finite(**values):
    for name, value in values.items():
        if not math.isfinite(value):
            raise InvalidStateError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class DuffingParams:
    alpha: float = 0.3
    beta: float = -1.0
    gamma: float = 1.0
    A: float = 0.5
    omega: float = 1.2

    def __post_init__(self):
        _check_finite(alpha=self.alpha, beta=self.beta, gamma=self.gamma,
                      A=self.A, omega=self.omega)
        if self.alpha < 0:
            raise InvalidStateError("alpha must be >= 0")
        if self.omega < 0:
            raise InvalidStateError("omega must be >= 0")

    @property
    def forcing_period(self) -> float:
        return 2.0 * math.pi / self.omega if self.omega > 0 else math.inf


@dataclass(frozen=True)
class SuppressiveParams:
    C: float = 1.0
    a: float = 1.0
    epsilon: float = 0.45

    def __post_init__(self):
        _check_finite(C=self.C, a=self.a, epsilon=self.epsilon)
        if self.C <= 0 or self.a <= 0 or self.epsilon <= 0:
            raise InvalidStateError("C, a and epsilon must all be > 0")


@dataclass(frozen=True)
class AwarenessState:
    t: float = 0.0
    D: float = 0.0
    D_dot: float = 0.0
    S: float = 0.0

    def __post_init__(self):
        _check_finite(t=self.t, D=self.D, D_dot=self.D_dot, S=self.S)

    def as_vector(self) -> np.ndarray:
        return np.array([self.D, self.D_dot, self.S])


# --------------------------------------------------------------------------
# Input signals


class InputSignal:
    """External input I(t). Subclasses return a finite level >= 0."""

    def __call__(self, t: float) -> float:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Zero(InputSignal):
    def __call__(self, t):
        return 0.0

    def describe(self):
        return {"kind": "zero"}


@dataclass(frozen=True)
class Constant(InputSignal):
    level: float

    def __post_init__(self):
        if not (math.isfinite(self.level) and self.level >= 0):
            raise ValueError(f"input level must be finite and >= 0, got {self.level!r}")

    def __call__(self, t):
        return self.level

    def describe(self):
        return {"kind": "constant", "level": self.level}


@dataclass(frozen=True)
class Sinusoid(InputSignal):
    """``amplitude * (1 + sin(omega_in t + phase)) / 2``, so it never dips below 0."""

    amplitude: float
    omega_in: float
    phase: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ValueError("sinusoid amplitude must be finite and >= 0")
        if not (math.isfinite(self.omega_in) and math.isfinite(self.phase)):
            raise ValueError("sinusoid frequency and phase must be finite")

    def __call__(self, t):
        return 0.5 * self.amplitude * (1.0 + math.sin(self.omega_in * t + self.phase))

    def describe(self):
        return {"kind": "sinusoid", "amplitude": self.amplitude,
                "omega_in": self.omega_in, "phase": self.phase}


@dataclass(frozen=True)
class Schedule(InputSignal):
    """Piecewise-constant input over half-open segments ``[t_start, t_end)``.

    Outside every segment the input is 0, which is how deprivation is spelled.
    """

    segments: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        segs = tuple((float(a), float(b), float(lvl)) for a, b, lvl in self.segments)
        prev_end = -math.inf
        for start, end, level in segs:
            if not (math.isfinite(start) and math.isfinite(end) and end > start):
                raise ValueError(f"bad schedule segment ({start}, {end})")
            if start < prev_end:
                raise ValueError("schedule segments must be sorted and non-overlapping")
            if not (math.isfinite(level) and level >= 0):
                raise ValueError("schedule levels must be finite and >= 0")
            prev_end = end
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "_starts", [s[0] for s in segs])

    def __call__(self, t):
        i = bisect.bisect_right(self._starts, t) - 1
        if i >= 0:
            start, end, level = self.segments[i]
            if t < end:
                return level
        return 0.0

    def describe(self):
        return {"kind": "schedule", "segments": [list(s) for s in self.segments]}


@dataclass(frozen=True)
class SeededNoise(InputSignal):
    """Sample-and-hold Gaussian input, clipped at 0.

    Sample ``k`` covers ``[k*sample_interval, (k+1)*sample_interval)``; samples
    are drawn in order from a generator seeded with ``seed``, so the value at a
    given time does not depend on the order of evaluation.
    """

    mean: float
    std: float
    seed: int
    sample_interval: float
    _samples: list = field(default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.std < 0 or self.sample_interval <= 0:
            raise ValueError("std must be >= 0 and sample_interval > 0")
        object.__setattr__(self, "_rng", np.random.default_rng(self.seed))

    def __call__(self, t):
        if t < 0:
            raise ValueError("input signals are defined for t >= 0")
        k = int(t // self.sample_interval)
        while len(self._samples) <= k:
            block = self._rng.normal(self.mean, self.std, size=256)
            self._samples.extend(np.maximum(block, 0.0).tolist())
        return self._samples[k]

    def describe(self):
        return {"kind": "seeded_noise", "mean": self.mean, "std": self.std,
                "seed": self.seed, "sample_interval": self.sample_interval}


def input_from_dict(spec: dict) -> InputSignal:
    kind = spec.get("kind", "zero")
    args = {k: v for k, v in spec.items() if k != "kind"}
    if kind == "zero":
        return Zero()
    if kind == "constant":
        return Constant(**args)
    if kind == "sinusoid":
        return Sinusoid(**args)
    if kind == "schedule":
        return Schedule(tuple(tuple(s) for s in args["segments"]))
    if kind == "seeded_noise":
        return SeededNoise(**args)
    raise ValueError(f"unknown input kind {kind!r}")


# --------------------------------------------------------------------------
# The vector field


def derivative(state: AwarenessState, dp: DuffingParams, sp: SuppressiveParams,
               input_value: float) -> tuple[float, float, float]:
    """Right-hand side of the awareness system at ``state``."""
    _check_finite(t=state.t, D=state.D, D_dot=state.D_dot, S=state.S, input_value=input_value)
    if input_value < 0:
        raise InvalidStateError("input_value must be >= 0")
    return _rhs(state.t, state.D, state.D_dot, state.S, input_value, dp, sp)


def _rhs(t, D, V, S, I, dp, sp):
    acc = -dp.alpha * V - dp.beta * D - dp.gamma * D * D * D + dp.A * math.sin(dp.omega * t)
    return V, acc, sp.C * (I - sp.a * S)


def response(D: float, S: float, epsilon: float, t: float | None = None) -> float:
    """Composed awareness level ``S + D / (epsilon + S)``.

    Raises :class:`SingularityError` once ``epsilon + S`` is no longer positive:
    the denominator has then crossed zero somewhere along the trajectory.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    denom = epsilon + S
    if not denom > 0:
        where = "" if t is None else f" at t={t!r}"
        raise SingularityError(f"epsilon + S = {denom!r} <= 0{where}", t=t)
    return S + D / denom


def suppression_weight(S: float, epsilon: float) -> float:
    """Weight ``1 / (epsilon + S)`` given to the Duffing displacement in R."""
    return 1.0 / (epsilon + S)


def _rk4(t, D, V, S, h, dp, sp, I0, Ih, I1):
    half = 0.5 * h
    k1d, k1v, k1s = _rhs(t, D, V, S, I0, dp, sp)
    k2d, k2v, k2s = _rhs(t + half, D + half * k1d, V + half * k1v, S + half * k1s, Ih, dp, sp)
    k3d, k3v, k3s = _rhs(t + half, D + half * k2d, V + half * k2v, S + half * k2s, Ih, dp, sp)
    k4d, k4v, k4s = _rhs(t + h, D + h * k3d, V + h * k3v, S + h * k3s, I1, dp, sp)
    sixth = h / 6.0
    return (D + sixth * (k1d + 2.0 * k2d + 2.0 * k3d + k4d),
            V + sixth * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
            S + sixth * (k1s + 2.0 * k2s + 2.0 * k3s + k4s))


def _diverged(D, V, S):
    # NaN fails every comparison, so test the negation.
    return not (abs(D) <= DIVERGENCE_LIMIT and abs(V) <= DIVERGENCE_LIMIT
                and abs(S) <= DIVERGENCE_LIMIT)


def step(state: AwarenessState, dp: DuffingParams, sp: SuppressiveParams,
         input: InputSignal, h: float) -> AwarenessState:
    """Advance ``state`` by one RK4 step of size ``h``.

    The input is evaluated exactly at the stage times t, t+h/2 and t+h.
    """
    if not h > 0:
        raise ValueError("step size h must be > 0")
    t = state.t
    D, V, S = _rk4(t, state.D, state.D_dot, state.S, h, dp, sp,
                   input(t), input(t + 0.5 * h), input(t + h))
    if _diverged(D, V, S):
        raise DivergenceError(f"integration diverged in step from t={t!r}",
                              state=state, step_index=0)
    return AwarenessState(t + h, D, V, S)


# --------------------------------------------------------------------------
# Trajectories


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution. ``data`` has one row per sample, columns t, D, D_dot, S, R, I."""

    h: float
    data: np.ndarray

    def __len__(self):
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, TRAJECTORY_COLUMNS.index(name)]

    @property
    def t(self):
        return self.column("t")

    @property
    def D(self):
        return self.column("D")

    @property
    def D_dot(self):
        return self.column("D_dot")

    @property
    def S(self):
        return self.column("S")

    @property
    def R(self):
        return self.column("R")

    @property
    def I(self):  # noqa: E743
        return self.column("I")

    def final_state(self) -> AwarenessState:
        t, D, V, S = self.data[-1, :4]
        return AwarenessState(float(t), float(D), float(V), float(S))

    def to_csv(self) -> str:
        return trajectory_csv(self.data)

    @classmethod
    def from_csv(cls, text: str, h: float | None = None) -> "Trajectory":
        lines = text.splitlines()
        if not lines or lines[0] != ",".join(TRAJECTORY_COLUMNS):
            raise ValueError("not a trajectory CSV")
        rows = [[float(x) for x in line.split(",")] for line in lines[1:] if line]
        data = np.array(rows, dtype=float).reshape(-1, len(TRAJECTORY_COLUMNS))
        if h is None:
            h = float(data[1, 0] - data[0, 0]) if len(data) > 1 else DEFAULT_STEP
        return cls(h, data)


def trajectory_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(TRAJECTORY_COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join(f"{float(x):.17g}" for x in row) + "\n")
    return buf.getvalue()


def simulate(initial: AwarenessState, dp: DuffingParams, sp: SuppressiveParams,
             input: InputSignal, h: float, T: float,
             max_steps: int = DEFAULT_MAX_STEPS) -> Trajectory:
    """Integrate from ``initial`` over horizon ``T`` with ``ceil(T/h)`` steps.

    Sample times are ``initial.t + i*h`` (computed from the index, not
    accumulated). On divergence the raised :class:`DivergenceError` carries the
    partial trajectory.
    """
    if not (h > 0 and T > 0):
        raise ValueError("h and T must be > 0")
    n = math.ceil(T / h - 1e-9)
    if n > max_steps:
        raise ValueError(f"T/h = {n} steps exceeds max_steps={max_steps}")

    t0 = initial.t
    eps = sp.epsilon
    out = np.empty((n + 1, 6))
    D, V, S = initial.D, initial.D_dot, initial.S
    I_prev = input(t0)
    out[0] = (t0, D, V, S, response(D, S, eps, t0), I_prev)
    t = t0
    for i in range(1, n + 1):
        t_next = t0 + i * h
        I_next = input(t_next)
        D, V, S = _rk4(t, D, V, S, h, dp, sp, I_prev, input(t + 0.5 * h), I_next)
        if _diverged(D, V, S):
            partial = Trajectory(h, out[:i].copy())
            raise DivergenceError(f"integration diverged at step {i} (t={t_next!r})",
                                  state=partial.final_state(), step_index=i - 1,
                                  partial=partial)
        out[i] = (t_next, D, V, S, response(D, S, eps, t_next), I_next)
        t, I_prev = t_next, I_next
    return Trajectory(h, out)


def energy(D, D_dot, beta: float, gamma: float):
    """Mechanical energy of the unforced oscillator."""
    D = np.asarray(D)
    D_dot = np.asarray(D_dot)
    return 0.5 * D_dot**2 + 0.5 * beta * D**2 + 0.25 * gamma * D**4

