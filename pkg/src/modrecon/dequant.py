"""Harmonic dequantization: bit patterns back to intervals of width ``delta/k``.

With harmonic gains the ``2k`` possible patterns partition ``[0, 2*delta]``
into cells ``[c*delta/k, (c+1)*delta/k)``, ``c = 0 .. 2k-1``.  A first bit of 0
with the first flip at look ``j`` gives cell ``k - j``; a first bit of 1 gives
cell ``k + j - 1``.  No flip behaves like ``j = k`` (the two edge cells).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import BitMeasurements, Mode, ModelError, ShapeError, Stream, uniform_block
from .forward import measure, measure_adaptive, select_adaptive

# Random draws stay this many cell widths clear of both edges so that
# re-measuring the estimate cannot flip a bit through rounding.
EDGE_MARGIN = 2.0 ** -20


class PointRule(str, Enum):
    RANDOM = "random"
    MIDPOINT = "midpoint"


@dataclass(frozen=True)
class DecodedInterval:
    lo: object
    hi: object
    j_star: int | None
    first_bit: int

    @property
    def width(self):
        return self.hi - self.lo


def decode_interval(bits, delta, k: int) -> DecodedInterval:
    """Interval for one scalar's adaptive pattern; only the first flip counts.

    Exact when ``delta`` is a :class:`fractions.Fraction`.
    """
    bits = [int(b) for b in bits]
    if len(bits) != k:
        raise ShapeError(f"expected {k} bits, got {len(bits)}")
    first = bits[0]
    j_star = next((j for j in range(1, k) if bits[j] != first), None)
    j = k if j_star is None else j_star
    cell = k - j if first == 0 else k + j - 1
    return DecodedInterval(delta * cell / k, delta * (cell + 1) / k, j_star, first)


def decode_cells(y: BitMeasurements) -> np.ndarray:
    """Cell index per scalar, vectorized over the whole record."""
    y = select_adaptive(y)
    k = y.k
    table = y.as_table()
    first = table[0]
    if k == 1:
        j_star = np.ones_like(first, dtype=np.int64)
    else:
        flipped = table[1:] != first[None, :]
        j_star = np.where(flipped.any(axis=0), flipped.argmax(axis=0) + 1, k)
    return np.where(first == 0, k - j_star, k + j_star - 1)


def hm_dequantize(y: BitMeasurements, delta: float, *, point_rule=PointRule.RANDOM,
                  seed: int = 0) -> np.ndarray:
    """Estimate ``u`` from its bits.

    ``random`` draws inside each decoded cell from the seeded dequantization
    stream (index = scalar position); ``midpoint`` returns cell centres.
    """
    if not delta > 0:
        raise ModelError("delta must be positive")
    cells = decode_cells(y).astype(np.float64)
    width = delta / y.k
    if PointRule(point_rule) is PointRule.MIDPOINT:
        frac = np.full(cells.shape, 0.5)
    else:
        frac = uniform_block(seed, Stream.DEQUANT, 0, y.p, open_interval=True)
        frac = np.clip(frac, EDGE_MARGIN, 1.0 - EDGE_MARGIN)
    return (cells + frac) * width


def required_k(epsilon: float) -> int:
    """Looks needed so the estimate lands within ``epsilon*delta`` of the truth."""
    if not 0 < epsilon <= 1:
        raise ModelError(f"epsilon must lie in (0, 1], got {epsilon}")
    return max(1, math.ceil(1.0 / epsilon - 1e-12))


def brute_force_decode(bits, delta: float, k: int, samples_per_cell: int = 64):
    """Hull of the grid points whose re-measurement reproduces ``bits``.

    The grid is offset by half a step so no sample sits on a cell boundary;
    returns ``None`` when nothing matches.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape != (k,):
        raise ShapeError(f"expected {k} bits")
    count = 2 * k * samples_per_cell
    step = 2.0 * delta / count
    grid = (np.arange(count) + 0.5) * step
    table = measure_adaptive(grid, k, delta).as_table()
    hits = np.all(table == bits[:, None], axis=0)
    if not hits.any():
        return None
    idx = np.flatnonzero(hits)
    return DecodedInterval(grid[idx[0]] - step / 2, grid[idx[-1]] + step / 2, None, int(bits[0]))


def consistent(u_hat, y: BitMeasurements, delta: float) -> bool:
    """True when re-measuring ``u_hat`` in ``y``'s mode reproduces ``y`` bit for bit."""
    return measure(u_hat, y.k, delta, y.mode) == y

