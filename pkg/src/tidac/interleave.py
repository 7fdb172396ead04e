"""
Time-interleaved modulator: M parallel paths at f_L = f_H / M.

The feedback filter is split into polyphase components H_k(z) with
H(z) = sum_k z^-k H_k(z^M) and arranged into the pseudo-circulant block filter

    Hbar[r, c] = H_{r-c}(z)             for r >= c
    Hbar[r, c] = z^-1 H_{M+r-c}(z)      for r <  c

which, applied to blocked input at the low rate, reproduces direct filtering
by H(z) exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SimulationDiverged
from .modulator import CodeStream


@dataclass(frozen=True)
class PolyphaseSet:
    """Polyphase components of a filter; ``components[k]`` = h[k], h[k+M], ..."""

    paths: int
    components: np.ndarray  # shape (M, P), zero padded
    n_taps: int

    def interleave(self):
        """Rebuild the original coefficient list."""
        return self.components.T.reshape(-1)[: self.n_taps].copy()


@dataclass(frozen=True)
class BlockFilter:
    """M x M matrix of FIR polynomials in z^-1 at the low rate.

    ``coeffs[r, c, j]`` multiplies input path ``c`` delayed by ``j`` blocks
    when producing output path ``r``.
    """

    paths: int
    coeffs: np.ndarray  # shape (M, M, P + 1)


def polyphase_decompose(h, paths):
    """Split ``h`` (z^0 term first) into ``paths`` polyphase components."""
    if paths < 1:
        raise ConfigurationError(f"number of paths must be >= 1, got {paths}")
    h = np.asarray(h, dtype=float)
    width = max(1, -(-len(h) // paths))
    padded = np.zeros(width * paths)
    padded[: len(h)] = h
    return PolyphaseSet(paths, padded.reshape(width, paths).T.copy(), len(h))


def block_filter(poly):
    m = poly.paths
    width = poly.components.shape[1]
    coeffs = np.zeros((m, m, width + 1))
    for r in range(m):
        for c in range(m):
            if r >= c:
                coeffs[r, c, :width] = poly.components[r - c]
            else:
                coeffs[r, c, 1:] = poly.components[m + r - c]
    return BlockFilter(m, coeffs)


def block_filter_apply(blocks, bf):
    """Filter an M-vector stream (rows = low-rate ticks) with the block filter."""
    blocks = np.asarray(blocks, dtype=float)
    if blocks.ndim != 2 or blocks.shape[1] != bf.paths:
        raise ConfigurationError(f"expected an (n, {bf.paths}) block stream, got {blocks.shape}")
    n_blocks = blocks.shape[0]
    out = np.zeros_like(blocks)
    for j in range(bf.coeffs.shape[2]):
        if j >= n_blocks:
            break
        # out[b] += coeffs[:, :, j] @ blocks[b - j]
        out[j:] += blocks[: n_blocks - j] @ bf.coeffs[:, :, j].T
    return out


def serialize(blocks):
    """Flatten an (n_blocks, M) stream back to the high rate."""
    return np.asarray(blocks).reshape(-1)


def demux(values, paths):
    """Split a high-rate stream into ``paths`` low-rate streams (p-th gets n = bM + p)."""
    values = np.asarray(values)
    if len(values) % paths:
        raise ConfigurationError(f"stream length {len(values)} is not a multiple of {paths}")
    return values.reshape(-1, paths).T.copy()


@dataclass
class TIResult:
    """Path streams Y_0..Y_{M-1} (undelayed) and the multiplexed, M-delayed stream."""

    paths: list
    multiplexed: CodeStream


def ti_modulate(x, paths, loop, q, dither=None, fill_code=0):
    """Error-feedback modulation evaluated block by block at the low rate.

    Each low-rate cycle consumes one block of M input samples. Inside a block
    the paths are evaluated in order, so the errors e_q with q < p of the same
    block feed w_p through the zero-delay terms of the block filter; older
    blocks enter through the delayed terms. The multiplexed output lags the
    direct-form modulator by exactly M high-rate ticks; its first M entries
    are ``fill_code``.
    """
    x = np.asarray(x, dtype=float)
    if len(x) % paths:
        raise ConfigurationError(f"input length {len(x)} is not a multiple of M={paths}")
    bf = block_filter(polyphase_decompose(loop.impulse_response, paths))
    depth = bf.coeffs.shape[2]
    # terms[r] = list of (c, j, coeff) with nonzero coefficients
    terms = [
        [(c, j, float(bf.coeffs[r, c, j]))
         for c in range(paths) for j in range(depth) if bf.coeffs[r, c, j] != 0.0]
        for r in range(paths)
    ]
    for r in range(paths):
        for c, j, _ in terms[r]:
            if j == 0 and c >= r:
                raise ConfigurationError("block filter is not strictly causal within a block")

    levels = [float(v) for v in q.levels]
    thresholds = q.thresholds
    single_bit = q.bits == 1
    thr0 = float(thresholds[0])
    n_blocks = len(x) // paths
    xb = x.reshape(n_blocks, paths).tolist()
    db = None
    if dither is not None:
        db = np.asarray(dither, dtype=float).reshape(n_blocks, paths).tolist()
    codes = np.empty((n_blocks, paths), dtype=np.int64)
    # ring of error blocks, errs[j] = block b - j
    errs = [[0.0] * paths for _ in range(depth)]
    for b in range(n_blocks):
        errs.pop()
        cur = [0.0] * paths
        errs.insert(0, cur)
        for r in range(paths):
            w = xb[b][r]
            for c, j, coeff in terms[r]:
                w += coeff * errs[j][c]
            if not math.isfinite(w):
                raise SimulationDiverged(b * paths + r, w)
            u = w + db[b][r] if db is not None else w
            if single_bit:
                code = 1 if u >= thr0 else 0
            else:
                code = int(np.searchsorted(thresholds, u, side="right"))
            cur[r] = levels[code] - w
            codes[b, r] = code

    path_streams = [CodeStream(codes[:, p], q, "low") for p in range(paths)]
    flat = codes.reshape(-1)
    mux = np.empty_like(flat)
    mux[:paths] = fill_code
    mux[paths:] = flat[: len(flat) - paths]
    return TIResult(path_streams, CodeStream(mux, q, "high", delay=paths))
