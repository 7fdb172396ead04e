"""
Error-feedback sigma-delta modulator running at the high rate f_H.

The loop adds the filtered quantization error back to the input,

    w(n) = x(n) + sum_k h[k] e(n-k),    y(n) = Q(w(n)),    e(n) = level(y(n)) - w(n)

so that Y(z) = X(z) + NTF(z) E(z) with NTF(z) = 1 + H(z) = (1 - z^-1)^L / D(z).
For L <= 2 the denominator is the identity and H(z) is a short FIR; for higher
orders the user supplies a stabilizing D(z) and H(z) is the truncated impulse
response obtained by long division.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SimulationDiverged

TAIL_TOLERANCE = 1e-12
MAX_TAPS = 200_000


@dataclass(frozen=True)
class LoopFilter:
    """Feedback filter H(z) = NTF(z) - 1 of the error-feedback loop.

    ``h`` holds the coefficients of z^-1 ... z^-K; the z^0 term is zero by
    construction (strict causality).
    """

    order: int
    h: np.ndarray
    denominator: np.ndarray = field(default_factory=lambda: np.array([1.0]))

    @property
    def taps(self):
        return len(self.h)

    @property
    def impulse_response(self):
        """Coefficients of H(z) including the zero z^0 term."""
        return np.concatenate([[0.0], self.h])

    @property
    def ntf(self):
        """Truncated impulse response of NTF(z) = 1 + H(z)."""
        return np.concatenate([[1.0], self.h])


@dataclass(frozen=True)
class Quantizer:
    """Uniform mid-rise quantizer with 2**bits levels across [-v_s, +v_s]."""

    bits: int = 1
    v_s: float = 1.0

    def __post_init__(self):
        if self.bits < 1:
            raise ConfigurationError(f"quantizer needs at least 1 bit, got {self.bits}")
        if not self.v_s > 0:
            raise ConfigurationError(f"full scale must be positive, got {self.v_s}")

    @property
    def n_codes(self):
        return 2 ** self.bits

    @property
    def levels(self):
        return np.linspace(-self.v_s, self.v_s, self.n_codes)

    @property
    def thresholds(self):
        lv = self.levels
        return 0.5 * (lv[:-1] + lv[1:])

    def level(self, code):
        return self.levels[code]


@dataclass
class CodeStream:
    """Quantized output sequence.

    ``codes`` are integers in 0 .. 2**bits - 1. ``rate`` is ``"high"`` for f_H
    streams and ``"low"`` for the f_L = f_H / M path streams. ``delay`` records
    how many high-rate ticks the stream lags the direct-form modulator.
    """

    codes: np.ndarray
    quantizer: Quantizer
    rate: str = "high"
    delay: int = 0

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int64)
        if self.codes.size and (self.codes.min() < 0 or self.codes.max() >= self.quantizer.n_codes):
            raise ConfigurationError("code outside the quantizer alphabet")

    def __len__(self):
        return len(self.codes)

    @property
    def levels(self):
        """Voltage level of every code."""
        return self.quantizer.levels[self.codes]


def _check_stable(den):
    if len(den) <= 1:
        return
    roots = np.roots(den)
    bad = [r for r in roots if abs(r) >= 1.0]
    if bad:
        report = ", ".join(f"{complex(r):.6g} (|r|={abs(r):.6g})" for r in roots)
        raise ConfigurationError(f"D(z) is not stable; roots: {report}")


def design_loop_filter(order, denominator=None, taps=None, tol=TAIL_TOLERANCE):
    """Build H(z) = (1 - z^-1)^L / D(z) - 1.

    For ``order`` 1 and 2 the result is exact and ``denominator`` must be left
    out (or be the identity). Higher orders need a stable ``denominator`` given
    as coefficients of 1, z^-1, z^-2, ... with leading coefficient 1. The long
    division is truncated once the tail falls below ``tol`` times the largest
    coefficient; an explicit ``taps`` must satisfy the same bound.
    """
    if int(order) != order or order < 1:
        raise ConfigurationError(f"modulator order must be a positive integer, got {order!r}")
    order = int(order)
    num = np.array([math.comb(order, k) * (-1) ** k for k in range(order + 1)], dtype=float)

    den = np.array([1.0]) if denominator is None else np.atleast_1d(np.asarray(denominator, float))
    den = np.trim_zeros(den, "b")
    identity = len(den) == 1 and den[0] == 1.0
    if order <= 2:
        if not identity:
            raise ConfigurationError(f"D(z) must be 1 for order {order}")
        return LoopFilter(order, num[1:].copy(), np.array([1.0]))
    if denominator is None:
        raise ConfigurationError(f"order {order} needs a stabilizing D(z)")
    if den[0] != 1.0:
        raise ConfigurationError(f"D(z) must have leading coefficient 1, got {den[0]}")
    _check_stable(den)

    limit = MAX_TAPS if taps is None else int(taps)
    ntf = []
    peak = 0.0
    for k in range(limit + 1):
        acc = num[k] if k < len(num) else 0.0
        for j in range(1, min(k, len(den) - 1) + 1):
            acc -= den[j] * ntf[k - j]
        ntf.append(acc)
        if k >= 1:
            peak = max(peak, abs(acc))
        # tail has to stay small for a full denominator span before we stop
        if taps is None and k > len(num) + len(den):
            window = ntf[-len(den):]
            if max(abs(v) for v in window) < tol * peak:
                break
    else:
        if taps is None:
            raise ConfigurationError(f"impulse response did not decay within {MAX_TAPS} taps")
    h = np.array(ntf[1:])
    if taps is not None:
        tail = abs(h[-1]) if len(h) else 0.0
        if tail >= tol * np.max(np.abs(h)):
            raise ConfigurationError(
                f"{taps} taps leave a tail of {tail:.3g}, above {tol:g} of the peak coefficient"
            )
    else:
        # drop the negligible tail
        keep = np.nonzero(np.abs(h) >= tol * np.max(np.abs(h)))[0]
        h = h[: keep[-1] + 1]
    return LoopFilter(order, h, den)


def quantize(w, q):
    """Nearest-level quantization with ties toward the higher code.

    Returns ``(code, level)``. Inputs beyond the outer levels clip.
    """
    code = int(np.searchsorted(q.thresholds, w, side="right"))
    return code, float(q.levels[code])


def modulate(x, loop, q, dither=None, return_error=False):
    """Run the error-feedback loop over the high-rate input ``x``.

    ``dither`` is an optional array added at the quantizer input only; since
    it enters the error it is shaped by the NTF like the quantization error.
    All filter states start at zero.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    h = [float(c) for c in loop.h]
    taps = len(h)
    levels = [float(v) for v in q.levels]
    thresholds = [float(t) for t in q.thresholds]
    single_bit = q.bits == 1
    thr0 = thresholds[0]
    if dither is not None:
        dither = np.asarray(dither, dtype=float)
        if dither.shape != x.shape:
            raise ConfigurationError("dither must match the input length")
        dv = dither.tolist()
    xv = x.tolist()

    codes = np.empty(n, dtype=np.int64)
    errors = np.empty(n) if return_error else None
    hist = [0.0] * taps  # hist[k] = e(n-1-k)
    search = np.searchsorted
    for i in range(n):
        w = xv[i]
        for k in range(taps):
            w += h[k] * hist[k]
        if not math.isfinite(w):
            raise SimulationDiverged(i, w)
        u = w + dv[i] if dither is not None else w
        if single_bit:
            c = 1 if u >= thr0 else 0
        else:
            c = int(search(thresholds, u, side="right"))
        e = levels[c] - w
        if taps:
            hist.insert(0, e)
            hist.pop()
        codes[i] = c
        if errors is not None:
            errors[i] = e
    stream = CodeStream(codes, q, "high")
    if return_error:
        return stream, errors
    return stream


def sine_input(n, amplitude, bin_index, n_fft, v_s=1.0, phase=0.0):
    """Coherent test tone: ``bin_index`` cycles every ``n_fft`` high-rate ticks."""
    t = np.arange(n)
    return amplitude * v_s * np.sin(2.0 * np.pi * bin_index * t / n_fft + phase)
