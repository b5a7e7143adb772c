"""Shared domain types, block-diagonal gain algebra and seeded random streams.

Index convention: every array index inside the package is 0-based.  Block
``r`` of a stacked vector of block length ``q`` occupies positions
``r*q .. r*q + q - 1``, so the strided sub-vector that collects scalar ``l``
across all blocks is ``v[l::q]``.  Functions that accept 1-based positions say
so explicitly (``one_based=True``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np
from numpy.random import Philox


class ModelError(ValueError):
    """Invalid configuration or argument domain."""


class ShapeError(ModelError):
    """Array lengths or layouts that do not fit together."""


class Stream(IntEnum):
    """Independent purposes sharing one seed."""

    GENERIC = 0
    D_GAINS = 1
    DEQUANT = 2
    B_ROWS = 3
    B_SIGNS = 4
    SCENE = 5
    SIGNAL = 6


_MASK64 = (1 << 64) - 1
_INV53 = 1.0 / (1 << 53)


def _raw_block(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    # Philox4x64: counter c yields outputs 4c .. 4c+3, so any index is reachable
    # without generating its predecessors.
    first, skip = divmod(start, 4)
    bg = Philox(key=[int(seed) & _MASK64, int(stream) & _MASK64], counter=first)
    return bg.random_raw(count + skip)[skip:]


def uniform_block(seed: int, stream: int, start: int, count: int,
                  lo=0.0, hi=1.0, *, open_interval: bool = False) -> np.ndarray:
    """Uniform draws for stream indices ``start .. start+count-1``.

    The value at a given index depends only on ``(seed, stream, index)``, so
    splitting a range into chunks processed in any order reproduces the same
    numbers.  With ``open_interval`` the unit draw lies strictly inside (0, 1).
    """
    if count < 0 or start < 0:
        raise ModelError("start and count must be nonnegative")
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if np.any(lo > hi):
        raise ModelError("uniform bounds require lo <= hi")
    raw = _raw_block(seed, stream, start, count) >> np.uint64(11)
    unit = raw.astype(np.float64)
    if open_interval:
        unit += 0.5
    unit *= _INV53
    out = lo + (hi - lo) * unit
    if not open_interval:
        # lo + (hi-lo)*u can round up to hi for u just below 1
        out = np.where(out >= hi, np.where(hi > lo, np.nextafter(hi, lo), lo), out)
    return out


def seeded_uniform(seed: int, stream_index: int, lo: float = 0.0, hi: float = 1.0) -> float:
    """Single deterministic draw in ``[lo, hi)`` keyed by ``(seed, stream_index)``."""
    if lo > hi:
        raise ModelError(f"seeded_uniform: lo={lo} > hi={hi}")
    if lo == hi:
        return float(lo)
    return float(uniform_block(seed, Stream.GENERIC, stream_index, 1, lo, hi)[0])


def seed_from(*parts: int) -> int:
    """Derive a 64-bit child seed from integer parts (stable across runs)."""
    ss = np.random.SeedSequence([int(p) & _MASK64 for p in parts])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class Mode(str, Enum):
    ADAPTIVE = "adaptive"
    NONADAPTIVE = "nonadaptive"


@dataclass(frozen=True)
class ModelConfig:
    """Scheme parameters.

    ``p = k_prime * q`` and the modulo period ``range = 2 * delta`` are derived,
    never stored, so they cannot drift out of sync.
    """

    n: int
    q: int
    k_prime: int
    k: int
    delta: float
    sparsity: int = 0
    seed: int = 0
    mode: Mode = Mode.ADAPTIVE

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ModelError(f"delta must be positive and finite, got {self.delta}")
        if self.k < 1:
            raise ModelError(f"k must be >= 1, got {self.k}")
        if self.k_prime < 1:
            raise ModelError(f"k_prime must be >= 1, got {self.k_prime}")
        if self.q < 1 or self.n < 1:
            raise ModelError("n and q must be positive")
        if self.q > self.n:
            raise ShapeError(f"q={self.q} exceeds n={self.n}")
        if not 0 <= self.sparsity <= self.q:
            raise ModelError(f"sparsity must lie in [0, q], got {self.sparsity}")
        if not 0 <= self.seed <= _MASK64:
            raise ModelError("seed must fit in 64 unsigned bits")

    @property
    def p(self) -> int:
        return self.k_prime * self.q

    @property
    def range(self) -> float:
        return 2.0 * self.delta

    @property
    def looks(self) -> int:
        return self.k if self.mode is Mode.ADAPTIVE else 2 * self.k - 1

    @property
    def m(self) -> int:
        return self.looks * self.p


class StackKind(str, Enum):
    D_RANDOM = "D_random"
    D_GEOMETRIC = "D_geometric"
    C_HARMONIC_ADAPTIVE = "C_harmonic_adaptive"
    C_HARMONIC_NONADAPTIVE = "C_harmonic_nonadaptive"
    GENERIC = "generic"


@dataclass(frozen=True, eq=False)
class BlockDiagStack:
    """Vertical stack of diagonal blocks kept as a ``(num_blocks, block_size)`` gain table."""

    gains: np.ndarray
    kind: StackKind = StackKind.GENERIC

    def __post_init__(self):
        g = np.array(self.gains, dtype=np.float64)
        if g.ndim != 2 or g.size == 0:
            raise ShapeError("gain table must be a nonempty 2-D array")
        if not np.all(np.isfinite(g)):
            raise ModelError("gain table has non-finite entries")
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)
        object.__setattr__(self, "kind", StackKind(self.kind))

    @property
    def num_blocks(self) -> int:
        return self.gains.shape[0]

    @property
    def block_size(self) -> int:
        return self.gains.shape[1]

    def column(self, l: int) -> np.ndarray:
        """Gains applied to scalar ``l`` across all blocks."""
        if not 0 <= l < self.block_size:
            raise IndexError(f"scalar index {l} outside [0, {self.block_size})")
        return self.gains[:, l]


def apply_block_stack(stack: BlockDiagStack, v) -> np.ndarray:
    """``out[r*b + i] = gains[r, i] * v[i]`` for block size ``b``."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != stack.block_size:
        raise ShapeError(f"vector length {v.shape} does not match block size {stack.block_size}")
    return (stack.gains * v[None, :]).reshape(-1)


def strided_subvector(v, start: int, stride: int, count: int, *, one_based: bool = False):
    """Entries ``v[start], v[start+stride], ...`` (``count`` of them).

    ``one_based=True`` interprets ``start`` in the 1-based notation
    ``x(i:q:(k-1)q+i)``.
    """
    v = np.asarray(v)
    if stride < 1 or count < 1:
        raise ModelError("stride and count must be positive")
    s0 = start - 1 if one_based else start
    if s0 < 0:
        raise IndexError(f"start position {start} is before the first element")
    last = s0 + (count - 1) * stride
    if last >= v.shape[0]:
        shown = last + 1 if one_based else last
        raise IndexError(f"position {shown} is out of bounds for length {v.shape[0]}")
    return v[s0:last + 1:stride].copy()


@dataclass(frozen=True, eq=False)
class BitMeasurements:
    """Binary observations, block-major: look ``j`` holds ``bits[j*p:(j+1)*p]``."""

    bits: np.ndarray
    mode: Mode
    k: int
    p: int

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 1 or (b.size and not np.isin(b, (0, 1)).all()):
            raise ModelError("bits must be a 1-D array of 0/1 values")
        b = b.astype(np.uint8)
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.k < 1 or self.p < 1:
            raise ModelError("k and p must be positive")
        if b.shape[0] != self.looks * self.p:
            raise ShapeError(
                f"{b.shape[0]} bits do not match {self.mode.value} layout "
                f"({self.looks} looks x p={self.p})")

    @property
    def looks(self) -> int:
        return self.k if self.mode is Mode.ADAPTIVE else 2 * self.k - 1

    def as_table(self) -> np.ndarray:
        """``(looks, p)`` view, row ``j`` being look ``j``."""
        return self.bits.reshape(self.looks, self.p)

    def __eq__(self, other):
        if not isinstance(other, BitMeasurements):
            return NotImplemented
        return (self.mode is other.mode and self.k == other.k and self.p == other.p
                and np.array_equal(self.bits, other.bits))


@dataclass(frozen=True)
class FreqGrid:
    """Search set for the matched filter: ``lo, lo+res, ...`` up to ``hi``."""

    lo: float
    hi: float
    resolution: float
    _points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.resolution > 0):
            raise ModelError("grid resolution must be positive")
        if not self.lo <= self.hi:
            raise ModelError(f"grid bounds inverted: lo={self.lo}, hi={self.hi}")
        count = int(math.floor((self.hi - self.lo) / self.resolution * (1 + 1e-12) + 1e-9)) + 1
        pts = self.lo + self.resolution * np.arange(count, dtype=np.float64)
        pts.setflags(write=False)
        object.__setattr__(self, "_points", pts)

    @property
    def points(self) -> np.ndarray:
        return self._points

    def __len__(self):
        return self._points.shape[0]

    @property
    def max_abs(self) -> float:
        return float(max(abs(self.lo), abs(self.hi)))
