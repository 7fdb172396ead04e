"""
Behavioural model of non-ideal DAC edges.

The shaping stage is a saturated integrator in a unity feedback loop:

    dv/dt = sat(target - v, V_o) / tau,        SR = V_o / tau

While |target - v| > V_o the output slews linearly at SR; once inside V_o it
settles exponentially with time constant tau. Rising and falling transitions
use their own (tau, SR) pair. Both pieces are integrated in closed form, so
waveforms and pulse areas carry no solver error.

All times inside this module are in high-rate ticks (T_H = 1); the public
functions convert from seconds and V/s with ``f_high``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dacbank import element_levels
from .errors import ConfigurationError


@dataclass(frozen=True)
class ShapeParams:
    """Edge parameters of one element (seconds, volts per second)."""

    tau_p: float = 0.0
    tau_n: float = 0.0
    sr_p: float = math.inf
    sr_n: float = math.inf

    def __post_init__(self):
        if self.tau_p < 0 or self.tau_n < 0:
            raise ConfigurationError("time constants must be non-negative")
        if not (self.sr_p > 0 and self.sr_n > 0):
            raise ConfigurationError("slew rates must be positive")

    @classmethod
    def from_saturation(cls, v_o, tau_p, tau_n=None, v_o_n=None):
        """Build from saturation level V_o and tau, using SR = V_o / tau."""
        tau_n = tau_p if tau_n is None else tau_n
        v_o_n = v_o if v_o_n is None else v_o_n
        sr_p = v_o / tau_p if tau_p > 0 else math.inf
        sr_n = v_o_n / tau_n if tau_n > 0 else math.inf
        return cls(tau_p, tau_n, sr_p, sr_n)

    @property
    def v_o_p(self):
        return self.sr_p * self.tau_p

    @property
    def v_o_n(self):
        return self.sr_n * self.tau_n

    @property
    def ideal(self):
        return self.tau_p == 0 and self.tau_n == 0 and math.isinf(self.sr_p) and math.isinf(self.sr_n)

    def normalized(self, f_high):
        """Same parameters with time measured in ticks of 1 / f_high."""
        return ShapeParams(self.tau_p * f_high, self.tau_n * f_high,
                           self.sr_p / f_high, self.sr_n / f_high)


@dataclass
class AnalogWaveform:
    """Samples of V(t) taken K times per high-rate tick, starting at tick edges."""

    samples: np.ndarray
    rate: float
    n_ticks: int
    oversample: int

    def __post_init__(self):
        if len(self.samples) != self.n_ticks * self.oversample:
            raise ConfigurationError("waveform length must be oversample x ticks")

    def at_ticks(self):
        """Values at the start of every tick."""
        return self.samples[:: self.oversample]


def _edge(tau, sr, dist):
    """(slew duration, remaining distance at the end of slewing) for one edge."""
    if math.isinf(sr):
        return 0.0, dist
    v_o = sr * tau
    if dist <= v_o:
        return 0.0, dist
    return (dist - v_o) / sr, v_o


def _advance(v0, target, t, p):
    """State after ``t`` ticks (t >= 0) heading to ``target`` from ``v0``."""
    d = target - v0
    if d == 0.0:
        return target
    if d > 0:
        tau, sr, s = p.tau_p, p.sr_p, 1.0
    else:
        tau, sr, s = p.tau_n, p.sr_n, -1.0
    dist = abs(d)
    ts, rem = _edge(tau, sr, dist)
    if t <= ts:
        return v0 + s * sr * t
    if tau == 0.0:
        return target
    return target - s * rem * math.exp(-(t - ts) / tau)


def _area(v0, target, t, p):
    """Integral of v over [0, t] for the same segment."""
    d = target - v0
    if d == 0.0:
        return target * t
    if d > 0:
        tau, sr, s = p.tau_p, p.sr_p, 1.0
    else:
        tau, sr, s = p.tau_n, p.sr_n, -1.0
    ts, rem = _edge(tau, sr, abs(d))
    if t <= ts:
        return v0 * t + 0.5 * s * sr * t * t
    area = v0 * ts + 0.5 * s * sr * ts * ts if ts > 0 else 0.0
    dt = t - ts
    if tau == 0.0:
        return area + target * dt
    return area + target * dt - s * rem * tau * -math.expm1(-dt / tau)


def _sample_ticks(v0, target, offsets, p):
    """Vectorized evaluation of every tick at the sub-sample ``offsets``."""
    v0 = v0[:, None]
    tg = target[:, None]
    t = offsets[None, :]
    d = tg - v0
    rising = d > 0
    tau = np.where(rising, p.tau_p, p.tau_n)
    sr = np.where(rising, p.sr_p, p.sr_n)
    s = np.sign(d)
    dist = np.abs(d)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        v_o = np.where(np.isinf(sr), np.inf, sr * tau)
        ts = np.where(dist > v_o, (dist - v_o) / sr, 0.0)
        rem = np.minimum(dist, v_o)
        slewing = v0 + s * np.where(np.isinf(sr), 0.0, sr) * t
        decay = np.where(tau > 0, np.exp(-(t - ts) / np.where(tau > 0, tau, 1.0)), 0.0)
        settling = tg - s * rem * decay
    out = np.where(t < ts, slewing, settling)
    return np.where(d == 0, tg, out)


def shape_element(levels, sp, oversample=16, f_high=1.0, v_init=None):
    """Shaped waveform of one element following a per-tick target sequence.

    Targets switch exactly at tick starts. The element is assumed settled at
    ``v_init`` (default: the first target) before tick 0.
    """
    if oversample < 1:
        raise ConfigurationError("oversample must be at least 1")
    levels = np.asarray(levels, dtype=float)
    n = len(levels)
    rate = oversample * f_high
    if n == 0:
        return AnalogWaveform(np.zeros(0), rate, 0, oversample)
    p = sp.normalized(f_high)
    if p.ideal:
        return AnalogWaveform(np.repeat(levels, oversample), rate, n, oversample)
    starts = np.empty(n)
    v = float(levels[0] if v_init is None else v_init)
    lv = levels.tolist()
    for i in range(n):
        starts[i] = v
        v = _advance(v, lv[i], 1.0, p)
    offsets = np.arange(oversample) / oversample
    samples = _sample_ticks(starts, levels, offsets, p).reshape(-1)
    return AnalogWaveform(samples, rate, n, oversample)


def tick_areas(levels, sp, f_high=1.0, v_init=None):
    """Exact integral of the shaped waveform over each tick (in units of T_H)."""
    levels = np.asarray(levels, dtype=float)
    p = sp.normalized(f_high)
    v = float(levels[0] if v_init is None else v_init)
    out = np.empty(len(levels))
    for i, tg in enumerate(levels.tolist()):
        out[i] = _area(v, tg, 1.0, p)
        v = _advance(v, tg, 1.0, p)
    return out


def pulse_area_error(width, sp, v_s=1.0, f_high=1.0, settle=64):
    """Area error of an isolated pulse of ``width`` ticks between idle levels.

    Returns ``(absolute_error, relative_error)``; the absolute error is in
    volt-ticks and the relative error is normalized by the ideal pulse area
    above idle, 2 * v_s * width.
    """
    levels = np.concatenate([np.full(settle, -v_s), np.full(width, v_s), np.full(settle, -v_s)])
    err = float(np.sum(tick_areas(levels, sp, f_high) - levels))
    return err, err / (2.0 * v_s * width)


def render_analog(schedule, params, v_s=1.0, oversample=16, f_high=1.0, default=None):
    """Sum of the shaped outputs of all elements (the analog adder).

    Each element's level sequence already includes its gain and offset. Edge
    parameters come from ``params``; ``default`` replaces them for elements
    whose params carry ideal edges.
    """
    lv = element_levels(schedule, params, v_s)
    total = np.zeros(schedule.n_ticks * oversample)
    for m, ep in enumerate(params):
        sp = ShapeParams(ep.tau_p, ep.tau_n, ep.sr_p, ep.sr_n)
        if sp.ideal and default is not None:
            sp = default
        # idle elements sit at their idle level before tick 0
        w = shape_element(lv[m], sp, oversample, f_high, v_init=lv[m][0])
        total += w.samples
    return AnalogWaveform(total, oversample * f_high, schedule.n_ticks, oversample)
