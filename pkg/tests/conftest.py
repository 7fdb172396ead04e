import pytest

from tidac.modulator import Quantizer, design_loop_filter, modulate, sine_input

N_FFT = 2 ** 15
TONE_BIN = 53
PATHS = 4

_acceptance_lines = []


def record_criterion(number, title, passed, detail):
    _acceptance_lines.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} -- {detail}")


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def tone_stream():
    """Default single-bit stream: L=2, A=0.707, bin 53, N=2^15 plus warm-up."""
    q = Quantizer(1)
    x = sine_input(N_FFT + 2 * PATHS, 0.707, TONE_BIN, N_FFT)
    y = modulate(x, design_loop_filter(2), q)
    return x, y
