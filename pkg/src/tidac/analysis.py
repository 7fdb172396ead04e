"""
Spectral measurements under coherent sampling.

The test tone sits exactly on an FFT bin, so a rectangular-window periodogram
has no leakage: the signal occupies one bin and every other in-band bin is
noise or distortion. Power values are one-sided and sum to the mean-square of
the analysed samples; dB values are relative to a full-scale sine of
amplitude ``full_scale``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AnalysisError

DB_FLOOR = 1e-300


@dataclass
class SpectrumReport:
    n: int
    rate: float
    f_high: float
    full_scale: float
    freqs: np.ndarray
    power: np.ndarray
    psd_db: np.ndarray
    signal_bin: int | None = None
    band_edge: float | None = None
    sndr_db: float | None = None
    harmonics_db: dict = field(default_factory=dict)
    dc_note: str = "DC bin excluded from noise"

    @property
    def resolution(self):
        return self.rate / self.n

    def bin_of(self, f):
        """Nearest bin to frequency ``f`` after folding into [0, rate/2]."""
        f = math.fmod(f, self.rate)
        if f < 0:
            f += self.rate
        if f > self.rate / 2:
            f = self.rate - f
        return int(round(f / self.resolution))

    def total_power(self):
        return float(np.sum(self.power))


def psd(signal, rate=1.0, n=None, full_scale=1.0, f_high=None):
    """Rectangular-window periodogram of the last ``n`` samples of ``signal``."""
    x = np.asarray(signal, dtype=float)
    n = len(x) if n is None else int(n)
    if n < 2 or len(x) < n:
        raise AnalysisError(f"need at least {n} samples, got {len(x)}")
    x = x[len(x) - n:]
    if not np.all(np.isfinite(x)):
        raise AnalysisError("signal contains non-finite samples")
    spec = np.fft.rfft(x) / n
    power = np.abs(spec) ** 2
    power[1:] *= 2.0
    if n % 2 == 0:
        power[-1] /= 2.0  # Nyquist bin is not doubled
    ref = full_scale ** 2 / 2.0
    psd_db = 10.0 * np.log10(np.maximum(power / ref, DB_FLOOR))
    freqs = np.arange(len(power)) * rate / n
    return SpectrumReport(n, rate, rate if f_high is None else f_high, full_scale,
                          freqs, power, psd_db)


def band_bins(report, osr):
    """Index of the last bin inside the signal band (0, f_B]."""
    f_b = report.f_high / (2.0 * osr)
    return f_b, int(math.floor(f_b / report.resolution + 1e-9))


def sndr(report, f_in, osr):
    """Signal to noise-plus-distortion ratio in dB over (0, f_B]."""
    f_b, top = band_bins(report, osr)
    if not 0 < f_in < f_b:
        raise AnalysisError(f"tone at {f_in:g} is outside the signal band (0, {f_b:g})")
    k = report.bin_of(f_in)
    p_sig = report.power[k]
    p_nd = float(np.sum(report.power[1: top + 1])) - p_sig
    if p_nd <= 0:
        return math.inf
    return 10.0 * math.log10(p_sig / p_nd)


def harmonic_level(report, f_in, k):
    """PSD (dB re full scale) at the k-th harmonic, aliased into [0, rate/2]."""
    return float(report.psd_db[report.bin_of(k * f_in)])


def local_floor(report, f, halfwidth=32, exclude=()):
    """Mean noise level (dB) of the bins around ``f``, excluding ``f`` itself
    and any bin listed in ``exclude``; bin 0 never counts."""
    k = report.bin_of(f)
    lo = max(1, k - halfwidth)
    hi = min(len(report.power) - 1, k + halfwidth)
    idx = [i for i in range(lo, hi + 1) if i != k and i not in set(exclude)]
    if not idx:
        raise AnalysisError("no neighbouring bins for a floor estimate")
    mean = float(np.mean(report.power[idx]))
    return 10.0 * math.log10(max(mean / (report.full_scale ** 2 / 2.0), DB_FLOOR))


def inband_slope(report, f_lo, f_hi, mask=(), min_bins=8):
    """Least-squares slope (dB/decade) of the PSD between ``f_lo`` and ``f_hi``.

    Bins at the frequencies in ``mask`` (signal, harmonics) are left out, as
    are bins at the numeric floor.
    """
    if f_lo <= 0 or f_hi / f_lo < 10.0 * (1 - 1e-9):
        raise AnalysisError("slope fit needs at least one decade above DC")
    lo = int(math.ceil(f_lo / report.resolution - 1e-9))
    hi = int(math.floor(f_hi / report.resolution + 1e-9))
    bins = np.arange(max(lo, 1), hi + 1)
    skip = {report.bin_of(f) for f in mask}
    bins = np.array([b for b in bins if b not in skip], dtype=int)
    if len(bins):
        bins = bins[report.power[bins] > DB_FLOOR]
    if len(bins) < min_bins:
        raise AnalysisError(f"only {len(bins)} usable bins between {f_lo:g} and {f_hi:g}")
    x = np.log10(report.freqs[bins])
    y = report.psd_db[bins]
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def with_metrics(report, f_in, osr, harmonics=(2, 3)):
    """Copy of ``report`` with the signal bin, band edge, SNDR and harmonics filled in."""
    f_b, _ = band_bins(report, osr)
    return replace(
        report,
        signal_bin=report.bin_of(f_in),
        band_edge=f_b,
        sndr_db=sndr(report, f_in, osr),
        harmonics_db={k: harmonic_level(report, f_in, k) for k in harmonics},
    )


def dr_sweep(amplitudes, measure, workers=1):
    """SNDR versus input amplitude.

    ``measure(amplitude_dbfs) -> sndr_db`` is called once per point; with
    ``workers`` > 1 the points run in a process pool (``measure`` must then
    be picklable). Results come back in input order.
    """
    amps = [float(a) for a in amplitudes]
    if any(b < a for a, b in zip(amps, amps[1:])):
        raise AnalysisError("sweep amplitudes must be sorted ascending")
    if workers > 1 and len(amps) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(measure, amps))
    else:
        values = [measure(a) for a in amps]
    return list(zip(amps, values))
