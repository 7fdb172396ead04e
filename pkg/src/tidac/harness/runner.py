"""Scenario execution: modulation, scheduling, rendering, measurement, files."""

from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..analysis import dr_sweep, inband_slope, psd, with_metrics
from ..dacbank import build_schedule, ideal_params, render_dt
from ..errors import RunError, ScenarioError, TidacError
from ..interleave import demux, ti_modulate
from ..modulator import Quantizer, design_loop_filter, modulate, sine_input
from ..pulseshape import render_analog
from .mismatch import gen_edges, gen_mismatch, split_edges, with_edges
from .scenario import dump_scenario, n_elements

CSV_DIGITS = 12


def fmt(v):
    """Decimal rendering with 12 significant digits."""
    if v is None:
        return ""
    return format(float(v), f".{CSV_DIGITS}g")


@dataclass
class Modulated:
    """High-rate stream shared by all cases of one scenario/amplitude."""

    amplitude: float
    f_in: float
    codes: np.ndarray
    path_streams: np.ndarray | None
    delay: int
    warmup: int


@dataclass
class CaseResult:
    name: str
    mode: str
    params: list
    report: object
    output: np.ndarray
    analog: bool
    metrics: dict = field(default_factory=dict)


def modulate_scenario(s, amplitude_dbfs=None):
    """Run the digital modulator for the scenario's input tone."""
    mod, dac, an = s.modulator, s.dac, s.analysis
    m = dac.paths
    q = Quantizer(mod.bits, dac.full_scale)
    loop = design_loop_filter(mod.order, mod.denominator or None)
    amp = s.input.linear() if amplitude_dbfs is None else 10.0 ** (amplitude_dbfs / 20.0)
    n = an.samples
    # one block for the interleaving delay, one for the moving-sum warm-up
    total = n + 2 * m
    x = sine_input(total, amp, s.input.bin, n, v_s=dac.full_scale)
    dither = None
    if mod.dither > 0:
        rng = np.random.Generator(np.random.PCG64([mod.dither_seed, 2]))
        dither = rng.uniform(-mod.dither, mod.dither, total) * dac.full_scale
    if mod.interleaved:
        res = ti_modulate(x, m, loop, q, dither=dither)
        codes = res.multiplexed.codes
        delay = res.multiplexed.delay
        paths = demux(codes, m)
    else:
        codes = modulate(x, loop, q, dither=dither).codes
        delay = 0
        paths = None
    return Modulated(amp, s.input.bin * dac.f_high / n, codes, paths, delay, 2 * m)


def case_params(s, case):
    """Element parameters (gain, offset, edges) for one case."""
    e = n_elements(case.mode, s.dac.paths, s.modulator.bits)
    params = gen_mismatch(s.mismatch.seed, s.mismatch, e) if case.mismatch else ideal_params(e)
    if case.shape and s.shape.kind == "slew":
        if case.mode == "single-dac":
            edges = [split_edges(s.shape, s.dac.full_scale, s.dac.f_high)]
        else:
            edges = gen_edges(s.shape, e, s.dac.full_scale, s.dac.f_high)
        params = with_edges(params, edges)
    return params


def full_scale(s, mode):
    return s.dac.full_scale * (1 if mode == "single-dac" else s.dac.paths)


def run_case(s, case, modulated):
    """Render one case and measure it."""
    dac, an = s.dac, s.analysis
    sched = build_schedule(case.mode, modulated.codes, dac.paths, s.modulator.bits,
                           modulated.path_streams)
    params = case_params(s, case)
    fs = full_scale(s, case.mode)
    n = an.samples
    analog = not all(p.ideal_edges for p in params)
    ideal = render_dt(sched, ideal_params(sched.n_elements), dac.full_scale)
    if analog:
        k = an.oversample
        wave = render_analog(sched, params, dac.full_scale, k, dac.f_high)
        out = wave.samples
        ref = np.repeat(ideal, k)
        rate, length = k * dac.f_high, n * k
    else:
        out = render_dt(sched, params, dac.full_scale)
        ref = ideal
        rate, length = dac.f_high, n
    report = psd(out, rate, length, fs, dac.f_high)
    report = with_metrics(report, modulated.f_in, s.modulator.osr)
    f_b = report.band_edge
    mask = [modulated.f_in * h for h in (1, 2, 3)]
    try:
        noise_slope = inband_slope(report, f_b / 10.0, f_b, mask)
    except TidacError:
        noise_slope = None
    residual = out - ref
    error_slope = None
    if np.any(residual[-length:] != 0.0):
        res_report = psd(residual, rate, length, fs, dac.f_high)
        try:
            error_slope = inband_slope(res_report, f_b / 10.0, f_b, mask)
        except TidacError:
            error_slope = None
    metrics = {
        "sndr_db": report.sndr_db,
        "signal_db": float(report.psd_db[report.signal_bin]),
        "h2_db": report.harmonics_db[2],
        "h3_db": report.harmonics_db[3],
        "noise_slope_db_dec": noise_slope,
        "error_slope_db_dec": error_slope,
    }
    return CaseResult(case.name, case.mode, params, report, out, analog, metrics)


def run_cases(s, amplitude_dbfs=None):
    """Modulate once and run every case; module errors carry scenario/case context."""
    label = s.source or s.name
    try:
        modulated = modulate_scenario(s, amplitude_dbfs)
    except (ScenarioError, RunError):
        raise
    except TidacError as exc:
        raise RunError(label, "<modulator>", exc) from exc
    results = []
    for c in s.cases:
        try:
            results.append(run_case(s, c, modulated))
        except (ScenarioError, RunError):
            raise
        except TidacError as exc:
            raise RunError(label, c.name, exc) from exc
    return modulated, results


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue(), newline="\n")


def manifest_text(s, modulated, results):
    """Resolved configuration plus every drawn element parameter."""
    lines = [dump_scenario(s).rstrip("\n"), "", "[resolved]",
             f"version = {__version__}",
             f"amplitude = {modulated.amplitude!r}",
             f"f_in = {modulated.f_in!r}",
             f"simulated_ticks = {len(modulated.codes)}",
             f"interleave_delay = {modulated.delay}",
             f"warmup_ticks = {modulated.warmup}",
             "rng = PCG64 seeded with [seed, stream]; stream 0 mismatch, 1 edges, 2 dither"]
    for r in results:
        lines.append("")
        lines.append(f"[elements {r.name}]")
        lines.append(f"mode = {r.mode}")
        lines.append(f"analog = {'on' if r.analog else 'off'}")
        for i, p in enumerate(r.params):
            lines.append(
                f"e{i} = gain={p.gain!r}, offset={p.offset!r}, tau_p={p.tau_p!r}, "
                f"tau_n={p.tau_n!r}, sr_p={p.sr_p!r}, sr_n={p.sr_n!r}"
            )
    return "\n".join(lines) + "\n"


@dataclass
class RunReport:
    scenario: str
    results: list
    files: list


def run_scenario(s, out_dir):
    """Run every case at the scenario amplitude and write PSD, metrics and manifest files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    modulated, results = run_cases(s)
    files = []
    for r in results:
        rep = r.report
        top = rep.n * s.dac.f_high / rep.rate / 2.0  # bins up to f_H / 2
        rows = [(fmt(rep.freqs[i]), fmt(rep.psd_db[i])) for i in range(int(top) + 1)]
        path = out_dir / f"{s.name}_{r.name}_psd.csv"
        _write_csv(path, ["frequency", "psd_db"], rows)
        files.append(path)
    header = ["case", "mode", "elements", "sndr_db", "signal_db", "h2_db", "h3_db",
              "noise_slope_db_dec", "error_slope_db_dec"]
    rows = [[r.name, r.mode, len(r.params)] + [fmt(r.metrics[k]) for k in header[3:]]
            for r in results]
    path = out_dir / f"{s.name}_metrics.csv"
    _write_csv(path, header, rows)
    files.append(path)
    path = out_dir / f"{s.name}_manifest.txt"
    path.write_text(manifest_text(s, modulated, results), newline="\n")
    files.append(path)
    return RunReport(s.name, results, files)


def sweep_point(s, amplitude_dbfs):
    """SNDR of every case at one amplitude (module level so it pickles)."""
    _, results = run_cases(s, amplitude_dbfs)
    return tuple(r.metrics["sndr_db"] for r in results)


def sweep_scenario(s, amplitudes=None, workers=1):
    """DR curves: ``{case name: [(amplitude_dbfs, sndr_db), ...]}``."""
    amps = list(s.analysis.sweep if amplitudes is None else amplitudes)
    if not amps:
        amps = [s.input.amplitude_dbfs if s.input.amplitude_dbfs is not None
                else 20.0 * np.log10(s.input.amplitude)]
    points = dr_sweep(amps, functools.partial(sweep_point, s), workers)
    return {c.name: [(a, v[i]) for a, v in points] for i, c in enumerate(s.cases)}


def write_sweep(s, out_dir, workers=1):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curves = sweep_scenario(s, workers=workers)
    names = [c.name for c in s.cases]
    amps = [a for a, _ in curves[names[0]]]
    rows = [[fmt(a)] + [fmt(curves[n][i][1]) for n in names] for i, a in enumerate(amps)]
    path = out_dir / f"{s.name}_sweep.csv"
    _write_csv(path, ["amplitude_dbfs"] + [f"{n}_sndr_db" for n in names], rows)
    return path, curves
