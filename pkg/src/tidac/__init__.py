"""Bit-true and waveform-level simulation of sigma-delta DACs built from
time-interleaved low-rate DACs, with rotating element selection."""

__version__ = "0.1.0"

from .analysis import SpectrumReport, harmonic_level, inband_slope, psd, sndr
from .dacbank import (
    ActivationSchedule,
    ElementParams,
    dwa_schedule,
    dwa_schedule_multibit,
    phase_assigned_schedule,
    render_dt,
    rz_schedule,
    single_dac_schedule,
)
from .interleave import block_filter, block_filter_apply, polyphase_decompose, ti_modulate
from .modulator import CodeStream, LoopFilter, Quantizer, design_loop_filter, modulate, quantize
from .pulseshape import AnalogWaveform, ShapeParams, render_analog, shape_element

__all__ = [
    "ActivationSchedule", "AnalogWaveform", "CodeStream", "ElementParams", "LoopFilter",
    "Quantizer", "ShapeParams", "SpectrumReport", "block_filter", "block_filter_apply",
    "design_loop_filter", "dwa_schedule", "dwa_schedule_multibit", "harmonic_level",
    "inband_slope", "modulate", "phase_assigned_schedule", "polyphase_decompose", "psd",
    "quantize", "render_analog", "render_dt", "rz_schedule", "shape_element",
    "single_dac_schedule", "sndr", "ti_modulate",
]
