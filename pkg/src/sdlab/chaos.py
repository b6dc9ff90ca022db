"""Chaos diagnostics for the awareness system: largest Lyapunov exponent,
windowed dispersion of trajectories, and Poincare-section parameter sweeps."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (
    AwarenessState,
    DivergenceError,
    DuffingParams,
    InputSignal,
    SuppressiveParams,
    Trajectory,
    Zero,
    _diverged,
    _rk4,
    simulate,
)

LAMBDA_THRESHOLD = 0.01
TRANSIENT_FRACTION = 0.1
MIN_FORCING_PERIODS = 100

_DIRECTION = (1.0 / math.sqrt(3.0),) * 3


@dataclass
class LyapunovEstimate:
    lambda_max: float
    T: float
    renorm_interval: float
    d0: float
    log_stretch: np.ndarray = field(repr=False)

    @property
    def running_mean(self) -> np.ndarray:
        """Cumulative estimate after each renormalization, for convergence plots."""
        n = np.arange(1, len(self.log_stretch) + 1)
        return np.cumsum(self.log_stretch) / (n * self.renorm_interval)

    def to_dict(self) -> dict:
        return {
            "lambda_max": float(self.lambda_max),
            "T": float(self.T),
            "renorm_interval": float(self.renorm_interval),
            "d0": float(self.d0),
            "log_stretch": [float(x) for x in self.log_stretch],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def lyapunov_max(dp: DuffingParams, sp: SuppressiveParams, input: InputSignal,
                 initial: AwarenessState, h: float, T: float,
                 renorm_interval: float = 1.0, d0: float = 1e-8,
                 transient_fraction: float = TRANSIENT_FRACTION,
                 enforce_horizon: bool = True) -> LyapunovEstimate:
    """Largest Lyapunov exponent of (D, D_dot, S) by two-trajectory renormalization.

    A companion trajectory starts ``d0`` away along the main diagonal; after
    every ``renorm_interval`` the separation is measured and rescaled back to
    ``d0``. Stretches from the leading ``transient_fraction`` of ``T`` are
    discarded, the rest are averaged over the time they cover.
    """
    if not 1e-10 <= d0 <= 1e-6:
        raise ValueError("d0 must lie in [1e-10, 1e-6]")
    if not (h > 0 and T > 0 and renorm_interval >= h):
        raise ValueError("need h > 0, T > 0 and renorm_interval >= h")
    if enforce_horizon and dp.A > 0 and dp.omega > 0:
        need = MIN_FORCING_PERIODS * dp.forcing_period
        if T < need - 1e-9:
            raise ValueError(f"horizon T={T} shorter than {MIN_FORCING_PERIODS} forcing periods ({need:.3f})")

    steps_per_renorm = max(1, round(renorm_interval / h))
    tau = steps_per_renorm * h
    n_total = max(1, round(T / tau))
    n_skip = int(round(transient_fraction * n_total))
    if n_skip >= n_total:
        raise ValueError("transient leaves no accumulation window")

    t0 = initial.t
    x = [initial.D, initial.D_dot, initial.S]
    y = [x[i] + d0 * _DIRECTION[i] for i in range(3)]
    stretches = []
    k = 0
    for j in range(n_total):
        for _ in range(steps_per_renorm):
            t = t0 + k * h
            I0, Ih, I1 = input(t), input(t + 0.5 * h), input(t + h)
            x = _rk4(t, x[0], x[1], x[2], h, dp, sp, I0, Ih, I1)
            y = _rk4(t, y[0], y[1], y[2], h, dp, sp, I0, Ih, I1)
            k += 1
            if _diverged(*x) or _diverged(*y):
                raise DivergenceError(f"trajectory diverged at t={t0 + k * h!r}", step_index=k - 1)
        dx = (y[0] - x[0], y[1] - x[1], y[2] - x[2])
        dist = math.sqrt(dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2])
        if not dist > 0:
            # Companion collapsed onto the reference in floating point.
            raise DivergenceError("separation underflowed to zero", step_index=k)
        if j >= n_skip:
            stretches.append(math.log(dist / d0))
        scale = d0 / dist
        y = [x[i] + dx[i] * scale for i in range(3)]

    log_stretch = np.array(stretches)
    T_eff = len(stretches) * tau
    return LyapunovEstimate(float(log_stretch.sum() / T_eff), n_total * tau, tau, d0, log_stretch)


def classify(lambda_max: float, threshold: float = LAMBDA_THRESHOLD) -> str:
    if lambda_max > threshold:
        return "chaotic"
    if lambda_max < -threshold:
        return "contracting"
    return "neutral"


def windowed_variance(trajectory: Trajectory, field: str = "R", window: float = 10.0) -> np.ndarray:
    """Unbiased variance of ``field`` over consecutive non-overlapping windows.

    Returns an array of shape (n_windows, 2) holding (t_center, variance). A
    trailing partial window is dropped.
    """
    if field not in ("D", "R"):
        raise ValueError("field must be 'D' or 'R'")
    h = trajectory.h
    if window < 10 * h - 1e-12:
        raise ValueError(f"window must cover at least 10 steps (>= {10 * h})")
    n_w = int(round(window / h))
    n = len(trajectory)
    if n_w > n:
        raise ValueError("window is longer than the trajectory")
    n_windows = n // n_w
    values = trajectory.column(field)[: n_windows * n_w].reshape(n_windows, n_w)
    times = trajectory.t[: n_windows * n_w].reshape(n_windows, n_w)
    return np.column_stack([times.mean(axis=1), values.var(axis=1, ddof=1)])


@dataclass
class RegimeReport:
    regime: str
    lambda_max: float
    variance: np.ndarray = field(repr=False)
    input_condition: dict = field(default_factory=dict)
    lyapunov: LyapunovEstimate | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "lambda_max": float(self.lambda_max),
            "input": self.input_condition,
            "R_variance": [[float(t), float(v)] for t, v in self.variance],
        }


def regime_report(trajectory: Trajectory, estimate: LyapunovEstimate, input: InputSignal,
                  window: float, threshold: float = LAMBDA_THRESHOLD) -> RegimeReport:
    return RegimeReport(
        regime=classify(estimate.lambda_max, threshold),
        lambda_max=estimate.lambda_max,
        variance=windowed_variance(trajectory, "R", window),
        input_condition=input.describe(),
        lyapunov=estimate,
    )


@dataclass
class Dichotomy:
    """Windowed response variance with and without input over one horizon."""

    on: np.ndarray
    deprived: np.ndarray
    transient: float

    def steady(self, series):
        return series[series[:, 0] >= self.transient]

    @property
    def variance_ratio(self) -> float:
        """Mean steady input-on variance over mean steady deprived variance (nan if the latter is 0)."""
        off = self.steady(self.deprived)[:, 1].mean()
        if off == 0:
            return math.nan
        return float(self.steady(self.on)[:, 1].mean() / off)

    @property
    def exceed_fraction(self) -> float:
        """Share of aligned steady windows where deprivation shows the larger variance."""
        on, off = self.steady(self.on), self.steady(self.deprived)
        return float(np.mean(off[:, 1] > on[:, 1]))


def dichotomy(dp: DuffingParams, sp: SuppressiveParams, on_input: InputSignal,
              initial: AwarenessState, h: float, T: float, window: float,
              transient_fraction: float = TRANSIENT_FRACTION) -> Dichotomy:
    on = simulate(initial, dp, sp, on_input, h, T)
    off = simulate(initial, dp, sp, Zero(), h, T)
    return Dichotomy(windowed_variance(on, "R", window), windowed_variance(off, "R", window),
                     initial.t + transient_fraction * T)


# --------------------------------------------------------------------------
# Poincare-section sweeps

SWEEPABLE_DUFFING = ("A", "alpha", "beta", "gamma")
SWEEPABLE_SUPPRESSIVE = ("C", "a", "epsilon")


@dataclass
class SweepRow:
    value: float
    abs_D: list[float]
    error: str | None = None

    @property
    def spread(self) -> float:
        if not self.abs_D:
            return math.nan
        return max(self.abs_D) - min(self.abs_D)


def poincare_section(dp: DuffingParams, sp: SuppressiveParams, initial: AwarenessState,
                     h: float, T: float, input: InputSignal | None = None,
                     transient_fraction: float = 0.5) -> list[float]:
    """|D| sampled once per forcing period at phase omega*t = 0 (mod 2 pi).

    Each period is split into ``ceil(period/h)`` equal steps so section times
    are hit exactly.
    """
    if not dp.omega > 0:
        raise ValueError("a Poincare section needs omega > 0")
    input = input or Zero()
    period = dp.forcing_period
    sub = math.ceil(period / h - 1e-9)
    hs = period / sub
    n_periods = int(T // period)
    n_skip = int(transient_fraction * n_periods)
    k0 = math.ceil(initial.t / period - 1e-12)
    D, V, S = initial.D, initial.D_dot, initial.S
    t = initial.t
    samples = []
    # leading partial period up to the first section time
    if k0 * period > t:
        lead = k0 * period - t
        m = math.ceil(lead / h - 1e-9)
        hl = lead / m
        for i in range(m):
            ti = t + i * hl
            D, V, S = _rk4(ti, D, V, S, hl, dp, sp, input(ti), input(ti + 0.5 * hl), input(ti + hl))
    for p in range(n_periods):
        base = (k0 + p) * period
        for i in range(sub):
            ti = base + i * hs
            D, V, S = _rk4(ti, D, V, S, hs, dp, sp, input(ti), input(ti + 0.5 * hs), input(ti + hs))
        if _diverged(D, V, S):
            raise DivergenceError(f"section sweep diverged in period {p}", step_index=p)
        if p + 1 > n_skip:
            samples.append(abs(D))
    return samples


def parameter_sweep(dp_base: DuffingParams, sp: SuppressiveParams, parameter: str,
                    values, h: float, T: float, initial: AwarenessState | None = None,
                    transient_fraction: float = 0.5) -> list[SweepRow]:
    """Section samples for each value of one model coefficient.

    Rows are produced in input order; a diverging row keeps its error message
    and the sweep carries on.
    """
    initial = initial or AwarenessState(0.0, 1.0, 0.0, 0.0)
    rows = []
    for v in values:
        v = float(v)
        try:
            if parameter in SWEEPABLE_DUFFING:
                dp, spv = replace(dp_base, **{parameter: v}), sp
            elif parameter in SWEEPABLE_SUPPRESSIVE:
                dp, spv = dp_base, replace(sp, **{parameter: v})
            else:
                raise ValueError(f"cannot sweep {parameter!r}")
            rows.append(SweepRow(v, poincare_section(dp, spv, initial, h, T,
                                                     transient_fraction=transient_fraction)))
        except DivergenceError as exc:
            rows.append(SweepRow(v, [], str(exc)))
    return rows


def amplitude_sweep(dp_base, sp, A_range, h, T, initial=None, transient_fraction=0.5):
    values = list(A_range)
    if any(not math.isfinite(a) for a in values) or values != sorted(values):
        raise ValueError("A_range must be finite and sorted")
    return parameter_sweep(dp_base, sp, "A", values, h, T, initial, transient_fraction)


def sweep_csv(rows: list[SweepRow], parameter: str = "A") -> str:
    buf = io.StringIO()
    buf.write(f"{parameter},sample_index,abs_D\n")
    for row in rows:
        if row.error is not None:
            buf.write(f"{row.value:.17g},-1,nan\n")
            continue
        for i, x in enumerate(row.abs_D):
            buf.write(f"{row.value:.17g},{i},{x:.17g}\n")
    return buf.getvalue()
