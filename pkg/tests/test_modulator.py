import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from tidac.analysis import inband_slope, psd, sndr
from tidac.errors import ConfigurationError, SimulationDiverged
from tidac.modulator import Quantizer, design_loop_filter, modulate, quantize, sine_input

from conftest import N_FFT, TONE_BIN


def direct_form_oracle(x, h, levels):
    """Scratch recursion: keep the whole error history and convolve explicitly."""
    e = []
    out = []
    for n, xn in enumerate(x):
        w = xn + sum(h[k - 1] * e[n - k] for k in range(1, len(h) + 1) if n - k >= 0)
        dist = [abs(w - lv) for lv in levels]
        best = min(dist)
        code = max(i for i, d in enumerate(dist) if d == best)  # ties go up
        out.append(code)
        e.append(levels[code] - w)
    return np.array(out)


class TestLoopFilter:
    def test_first_order(self):
        assert design_loop_filter(1).h.tolist() == [-1.0]

    def test_second_order(self):
        assert design_loop_filter(2).h.tolist() == [-2.0, 1.0]

    def test_third_order_long_division(self):
        den = [1.0, -0.5]
        lf = design_loop_filter(3, den)
        impulse = np.zeros(len(lf.h) + 1)
        impulse[0] = 1.0
        ref = signal.lfilter([1, -3, 3, -1], den, impulse)
        np.testing.assert_allclose(lf.ntf, ref, rtol=0, atol=1e-12)
        # convolving back with D recovers (1 - z^-1)^3
        back = np.convolve(lf.ntf, den)[: len(lf.ntf)]
        expect = np.zeros_like(back)
        expect[:4] = [1, -3, 3, -1]
        np.testing.assert_allclose(back, expect, atol=1e-12)
        assert lf.h[:3].tolist() == pytest.approx([-2.5, 1.75, -0.125])

    def test_third_order_tail_below_tolerance(self):
        den = [1.0, -0.5]
        lf = design_loop_filter(3, den)
        impulse = np.zeros(len(lf.h) + 50)
        impulse[0] = 1.0
        full = signal.lfilter([1, -3, 3, -1], den, impulse)[1:]
        tail = np.abs(full[len(lf.h):])
        assert tail.max() < 1e-12 * np.max(np.abs(lf.h))

    def test_high_order_needs_denominator(self):
        with pytest.raises(ConfigurationError):
            design_loop_filter(3)

    def test_unstable_denominator_reports_roots(self):
        with pytest.raises(ConfigurationError, match="roots"):
            design_loop_filter(3, [1.0, -1.5])

    def test_denominator_rejected_for_low_order(self):
        with pytest.raises(ConfigurationError):
            design_loop_filter(2, [1.0, -0.5])

    def test_short_explicit_truncation_rejected(self):
        with pytest.raises(ConfigurationError):
            design_loop_filter(3, [1.0, -0.5], taps=5)


class TestQuantize:
    def test_single_bit_positive(self):
        assert quantize(0.2, Quantizer(1)) == (1, 1.0)

    def test_overload_clips(self):
        assert quantize(-3.0, Quantizer(3, 1.0))[0] == 0

    def test_tie_goes_up(self):
        assert quantize(0.0, Quantizer(1)) == (1, 1.0)

    def test_levels_uniform(self):
        np.testing.assert_allclose(np.diff(Quantizer(3).levels), 2 / 7)
        assert Quantizer(1).levels.tolist() == [-1.0, 1.0]


class TestModulate:
    def test_matches_direct_form_oracle(self):
        rng = np.random.default_rng(5)
        for order in (1, 2):
            for bits in (1, 3):
                x = rng.uniform(-0.6, 0.6, 400)
                q = Quantizer(bits)
                y = modulate(x, design_loop_filter(order), q)
                ref = direct_form_oracle(x, design_loop_filter(order).h.tolist(), q.levels.tolist())
                np.testing.assert_array_equal(y.codes, ref)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-1.0, 1.0), min_size=1, max_size=200), st.sampled_from([1, 2]),
           st.sampled_from([1, 2, 3]))
    def test_reconstruction_identity(self, xs, order, bits):
        x = np.array(xs)
        lf = design_loop_filter(order)
        y, e = modulate(x, lf, Quantizer(bits), return_error=True)
        fb = np.convolve(e, lf.impulse_response)[: len(x)]
        np.testing.assert_allclose(y.levels - e - fb, x, atol=1e-12)

    def test_deterministic(self, tone_stream):
        x, y = tone_stream
        again = modulate(x, design_loop_filter(2), Quantizer(1))
        np.testing.assert_array_equal(again.codes, y.codes)

    def test_single_bit_alphabet(self, tone_stream):
        _, y = tone_stream
        assert set(np.unique(y.levels)) <= {-1.0, 1.0}

    def test_zero_input_mean(self):
        y = modulate(np.zeros(N_FFT), design_loop_filter(2), Quantizer(1))
        assert abs(y.levels.mean()) <= 2 / math.sqrt(N_FFT)

    def test_dc_passes_with_unity_gain(self):
        y = modulate(np.full(N_FFT, 0.5), design_loop_filter(1), Quantizer(1))
        assert y.levels.mean() == pytest.approx(0.5, abs=1e-2)

    @pytest.mark.parametrize("order", [1, 2])
    def test_noise_shaping_slope(self, order):
        # undithered zero input falls into a limit cycle with no in-band power
        rng = np.random.default_rng(0)
        y = modulate(np.zeros(N_FFT), design_loop_filter(order), Quantizer(1),
                     dither=rng.uniform(-0.2, 0.2, N_FFT))
        rep = psd(y.levels)
        f_b = 1 / 64
        assert inband_slope(rep, f_b / 10, f_b) == pytest.approx(20 * order, abs=5)

    def test_sndr_default_configuration(self, tone_stream):
        _, y = tone_stream
        rep = psd(y.levels, n=N_FFT)
        assert sndr(rep, TONE_BIN / N_FFT, 64) == pytest.approx(69.7, abs=3)

    def test_divergence_reports_tick(self):
        x = np.zeros(20)
        x[7] = np.nan
        with pytest.raises(SimulationDiverged) as info:
            modulate(x, design_loop_filter(2), Quantizer(1))
        assert info.value.tick == 7

    def test_dither_length_checked(self):
        with pytest.raises(ConfigurationError):
            modulate(np.zeros(8), design_loop_filter(1), Quantizer(1), dither=np.zeros(4))

    def test_higher_order_runs_stably(self):
        lf = design_loop_filter(3, [1.0, -1.2, 0.5, -0.08])
        x = sine_input(4096, 0.3, 5, 4096)
        y, e = modulate(x, lf, Quantizer(3), return_error=True)
        assert np.all(np.abs(e) < 1.0)
