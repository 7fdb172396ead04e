"""
Bank of low-rate DACs driven by clocks shifted by one high-rate tick each.

Every element outputs ``g_m * level + V_off,m`` where the level is +unit while
the element holds a duty pulse and -unit otherwise (unit = V_S for single-bit
elements, V_S / (2**d - 1) for unit elements of a d-bit DAC). Duty pulses last
M high-rate ticks, i.e. one low-rate period T_L.

Scheduling modes:

* ``single-dac``     one element at f_H, pulses of one tick (no interleaving)
* ``phase-assigned`` element p converts path stream Y_p (thermometric for d > 1)
* ``dwa``            rotating pointer over M elements, one step per logic one
* ``multibit-dwa``   pointer over M (2**d - 1) unit elements, y(n) steps per tick
* ``rz``             ``dwa`` over M + 1 elements so every pulse returns to idle
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ScheduleCollision

MODES = ("single-dac", "phase-assigned", "dwa", "multibit-dwa", "rz")


@dataclass(frozen=True)
class ElementParams:
    """Static model of one DAC element: gain, offset and edge behaviour.

    ``tau_*`` are time constants in seconds and ``sr_*`` slew rates in V/s,
    ``_p`` for rising (down-to-up) and ``_n`` for falling transitions. An
    infinite slew rate disables slewing; zero time constants give ideal edges.
    """

    gain: float = 1.0
    offset: float = 0.0
    tau_p: float = 0.0
    tau_n: float = 0.0
    sr_p: float = math.inf
    sr_n: float = math.inf

    def __post_init__(self):
        if not self.gain > 0:
            raise ConfigurationError(f"element gain must be positive, got {self.gain}")
        if self.tau_p < 0 or self.tau_n < 0:
            raise ConfigurationError("time constants must be non-negative")
        if not (self.sr_p > 0 and self.sr_n > 0):
            raise ConfigurationError("slew rates must be positive")

    @property
    def ideal_edges(self):
        return self.tau_p == 0 and self.tau_n == 0 and math.isinf(self.sr_p) and math.isinf(self.sr_n)


def ideal_params(n):
    return [ElementParams() for _ in range(n)]


@dataclass
class ActivationSchedule:
    """Duty pulses of every element.

    ``starts`` and ``elements`` list each trigger (tick, element) in trigger
    order; every pulse lasts ``duty`` ticks. Pulses running past ``n_ticks``
    are clipped at render time.
    """

    mode: str
    n_elements: int
    duty: int
    n_ticks: int
    starts: np.ndarray
    elements: np.ndarray
    units_per_code: int = 1

    def __post_init__(self):
        self.starts = np.asarray(self.starts, dtype=np.int64)
        self.elements = np.asarray(self.elements, dtype=np.int64)

    def intervals(self, element):
        """Ordered ``(start, duty)`` pairs of one element."""
        sel = self.starts[self.elements == element]
        return [(int(s), self.duty) for s in np.sort(sel)]

    def trigger_counts(self, upto=None):
        sel = self.elements if upto is None else self.elements[self.starts < upto]
        return np.bincount(sel, minlength=self.n_elements)

    def duty_matrix(self):
        """Boolean (n_elements, n_ticks) array, True while an element is in duty."""
        diff = np.zeros((self.n_elements, self.n_ticks + 1), dtype=np.int32)
        ends = np.minimum(self.starts + self.duty, self.n_ticks)
        np.add.at(diff, (self.elements, self.starts), 1)
        np.add.at(diff, (self.elements, ends), -1)
        return np.cumsum(diff[:, :-1], axis=1) > 0

    def min_gaps(self):
        """Smallest idle gap (ticks) between consecutive pulses, per element.

        Elements with fewer than two pulses report a large sentinel.
        """
        order = np.lexsort((self.starts, self.elements))
        el = self.elements[order]
        st = self.starts[order]
        gaps = np.full(self.n_elements, np.iinfo(np.int64).max)
        if len(st) < 2:
            return gaps
        same = el[1:] == el[:-1]
        d = st[1:] - st[:-1] - self.duty
        if same.any():
            np.minimum.at(gaps, el[1:][same], d[same])
        return gaps

    def validate(self):
        """Raise :class:`ScheduleCollision` if any element overlaps itself."""
        if len(self.starts) < 2:
            return
        order = np.lexsort((self.starts, self.elements))
        el = self.elements[order]
        st = self.starts[order]
        bad = np.nonzero((el[1:] == el[:-1]) & (st[1:] - st[:-1] < self.duty))[0]
        if len(bad):
            i = bad[0]
            raise ScheduleCollision(int(el[i + 1]), int(st[i + 1]), int(st[i]))


def _single_bit(codes):
    codes = np.asarray(codes, dtype=np.int64)
    if codes.size and (codes.min() < 0 or codes.max() > 1):
        raise ConfigurationError("single-bit schedule needs codes in {0, 1}")
    return codes


def _codes(stream):
    return np.asarray(getattr(stream, "codes", stream), dtype=np.int64)


def single_dac_schedule(y):
    """One high-rate element; each logic one is a single-tick duty pulse."""
    y = _single_bit(_codes(y))
    starts = np.nonzero(y)[0]
    sched = ActivationSchedule("single-dac", 1, 1, len(y), starts, np.zeros_like(starts))
    sched.validate()
    return sched


def phase_assigned_schedule(streams, bits=1):
    """Element(s) of path p convert Y_p, starting conversions at ticks p, p+M, ...

    ``streams`` is a sequence of M equally long low-rate code sequences. For
    ``bits`` > 1 each path owns 2**bits - 1 unit elements driven by the
    thermometric code of Y_p (element k of the path is on when k < Y_p).
    """
    rows = np.array([_codes(s) for s in streams], dtype=np.int64)
    if rows.ndim != 2:
        raise ConfigurationError("path streams must have equal lengths")
    m, n_blocks = rows.shape
    units = 2 ** bits - 1
    if rows.size and (rows.min() < 0 or rows.max() > units):
        raise ConfigurationError(f"path codes must lie in 0..{units}")
    starts, elements = [], []
    tick = np.arange(n_blocks)[None, :] * m + np.arange(m)[:, None]
    for k in range(units):
        on = rows > k
        p_idx, b_idx = np.nonzero(on)
        starts.append(tick[p_idx, b_idx])
        elements.append(p_idx * units + k)
    starts = np.concatenate(starts)
    elements = np.concatenate(elements)
    order = np.lexsort((elements, starts))
    sched = ActivationSchedule(
        "phase-assigned", m * units, m, m * n_blocks, starts[order], elements[order], units
    )
    sched.validate()
    return sched


def dwa_schedule(y, paths, n_elements=None, mode="dwa"):
    """Rotating-pointer selection for a single-bit high-rate stream.

    The pointer starts at element 0. Each logic one triggers an M-tick pulse
    on the pointed element and advances the pointer by one (mod E).
    """
    y = _single_bit(_codes(y))
    n_elements = paths if n_elements is None else n_elements
    starts = np.nonzero(y)[0]
    elements = np.arange(len(starts)) % n_elements
    sched = ActivationSchedule(mode, n_elements, paths, len(y), starts, elements)
    sched.validate()
    return sched


def dwa_schedule_multibit(y, paths, bits):
    """Pointer over M (2**d - 1) shared unit elements, advanced by y(n) per tick.

    All y(n) selected elements start their M-tick pulses at tick n.
    """
    if bits < 2:
        raise ConfigurationError("multibit DWA needs at least 2 bits")
    units = 2 ** bits - 1
    n_elements = paths * units
    y = _codes(y)
    if y.size and (y.min() < 0 or y.max() > units):
        raise ConfigurationError(f"codes must lie in 0..{units}")
    pointer = (np.cumsum(y) - y) % n_elements
    starts = np.repeat(np.arange(len(y)), y)
    first = np.repeat(pointer, y)
    # position within each tick's run of selected elements
    offs = np.arange(len(starts)) - np.repeat(np.cumsum(y) - y, y)
    elements = (first + offs) % n_elements
    sched = ActivationSchedule("multibit-dwa", n_elements, paths, len(y), starts, elements, units)
    sched.validate()
    return sched


def rz_schedule(y, paths):
    """Pointer rotation over M + 1 elements: at least one element is always idle."""
    return dwa_schedule(y, paths, paths + 1, mode="rz")


def element_levels(schedule, params, v_s=1.0):
    """Per-element output levels (n_elements, n_ticks), gain and offset applied."""
    if len(params) != schedule.n_elements:
        raise ConfigurationError(
            f"{len(params)} element parameter sets for {schedule.n_elements} elements"
        )
    unit = v_s / schedule.units_per_code
    duty = schedule.duty_matrix()
    gains = np.array([p.gain for p in params])[:, None]
    offsets = np.array([p.offset for p in params])[:, None]
    return gains * np.where(duty, unit, -unit) + offsets


def render_dt(schedule, params, v_s=1.0):
    """Ideal (rectangular pulse) output of the analog adder, one value per tick."""
    return element_levels(schedule, params, v_s).sum(axis=0)


def moving_sum(codes, paths, v_s=1.0, units_per_code=1):
    """Reference model: v_s times the M-tap moving sum of the bipolar stream.

    Samples before the stream start count as idle (bipolar -units). For d-bit
    codes the bipolar value of code c is (2c - units) / units.
    """
    c = _codes(codes).astype(float)
    bip = (2.0 * c - units_per_code) / units_per_code
    padded = np.concatenate([np.full(paths - 1, -1.0), bip])
    csum = np.concatenate([[0.0], np.cumsum(padded)])
    return v_s * (csum[paths:] - csum[:-paths])


def build_schedule(mode, y, paths, bits=1, path_streams=None):
    """Dispatch on the mode name. ``y`` is the multiplexed high-rate stream."""
    if mode == "single-dac":
        return single_dac_schedule(y)
    if mode == "phase-assigned":
        if path_streams is None:
            from .interleave import demux
            path_streams = demux(_codes(y), paths)
        return phase_assigned_schedule(path_streams, bits)
    if mode == "dwa":
        return dwa_schedule(y, paths)
    if mode == "multibit-dwa":
        return dwa_schedule_multibit(y, paths, bits)
    if mode == "rz":
        return rz_schedule(y, paths)
    raise ConfigurationError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
