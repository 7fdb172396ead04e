"""
Deterministic element-parameter draws.

Random values come from numpy's PCG64 generator seeded with
``[seed, stream]`` (stream 0 for gain/offset mismatch, 1 for edge
parameters). PCG64 output is platform independent, so a seed pins the
vectors everywhere. Draws are made element by element, so the first k
elements of an n-element draw equal a k-element draw with the same seed.
"""

from __future__ import annotations

import math

import numpy as np

from ..dacbank import ElementParams
from ..errors import ScenarioError

MISMATCH_STREAM = 0
SHAPE_STREAM = 1
SPREAD_RTOL = 0.01


def resolve_spread(distribution, half_range=None, std=None):
    """Return ``(half_range, std)`` for a distribution given either one.

    A uniform distribution on [-a, +a] has std a / sqrt(3). Supplying both
    requires them to agree within 1 %. Normal draws have no range.
    """
    if distribution == "normal":
        if std is None:
            raise ScenarioError("normal mismatch needs std")
        if half_range is not None:
            raise ScenarioError("normal mismatch takes std only")
        return None, float(std)
    if half_range is None and std is None:
        raise ScenarioError("need range or std")
    if half_range is not None and half_range < 0 or std is not None and std < 0:
        raise ScenarioError("range and std must be non-negative")
    if half_range is None:
        return std * math.sqrt(3.0), float(std)
    implied = half_range / math.sqrt(3.0)
    if std is not None and not math.isclose(std, implied, rel_tol=SPREAD_RTOL, abs_tol=1e-15):
        raise ScenarioError(
            f"range {half_range:g} implies std {implied:.6g}, inconsistent with std {std:g}"
        )
    return float(half_range), implied


def _rng(seed, stream):
    return np.random.Generator(np.random.PCG64([int(seed), stream]))


def _draw(rng, distribution, half_range, std, count, per_element):
    if distribution == "normal":
        return rng.normal(0.0, std, size=(count, per_element))
    return rng.uniform(-half_range, half_range, size=(count, per_element))


def gen_mismatch(seed, spec, n):
    """Gain and offset mismatch for ``n`` elements.

    Gains are 1 + delta_g and offsets delta_off, each drawn from the mismatch
    distribution. Explicit ``gains``/``offsets`` vectors bypass the draw (the
    first ``n`` entries are used).
    """
    apply = set(spec.apply)
    if spec.gains or spec.offsets:
        gains = list(spec.gains[:n]) if spec.gains else [1.0] * n
        offsets = list(spec.offsets[:n]) if spec.offsets else [0.0] * n
        if len(gains) < n or len(offsets) < n:
            raise ScenarioError(f"explicit mismatch vectors are shorter than {n} elements")
    else:
        a, s = resolve_spread(spec.distribution, spec.range, spec.std)
        deltas = _draw(_rng(seed, MISMATCH_STREAM), spec.distribution, a, s, n, 2)
        gains = (1.0 + deltas[:, 0]).tolist() if "gain" in apply else [1.0] * n
        offsets = deltas[:, 1].tolist() if "offset" in apply else [0.0] * n
    return [ElementParams(gain=float(g), offset=float(o)) for g, o in zip(gains, offsets)]


def nominal_edges(spec, v_s=1.0, f_high=1.0):
    """Nominal ``(tau, sr)`` in seconds and V/s."""
    return spec.tau / f_high, spec.slew_rate * v_s * f_high


def gen_edges(spec, n, v_s=1.0, f_high=1.0):
    """Per-element ``(tau_p, tau_n, sr_p, sr_n)``, each nominal * (1 + delta)."""
    tau, sr = nominal_edges(spec, v_s, f_high)
    if spec.range is None and spec.std is None:
        return [(tau, tau, sr, sr)] * n
    a, s = resolve_spread("uniform", spec.range, spec.std)
    deltas = _draw(_rng(spec.seed, SHAPE_STREAM), "uniform", a, s, n, 4)
    return [(tau * (1 + d[0]), tau * (1 + d[1]), sr * (1 + d[2]), sr * (1 + d[3]))
            for d in deltas.tolist()]


def split_edges(spec, v_s=1.0, f_high=1.0):
    """Single high-rate DAC: rising edge nominal, falling edge nominal * (1 + split)."""
    tau, sr = nominal_edges(spec, v_s, f_high)
    return tau, tau * (1 + spec.split), sr, sr * (1 + spec.split)


def with_edges(params, edges):
    return [ElementParams(p.gain, p.offset, e[0], e[1], e[2], e[3]) for p, e in zip(params, edges)]
