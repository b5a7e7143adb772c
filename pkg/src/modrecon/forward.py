"""Measurement synthesis: ``y = Q(C mod(D B x, R))``."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import fft as sfft

from .core import (BitMeasurements, BlockDiagStack, Mode, ModelConfig, ModelError,
                   ShapeError, StackKind, Stream, apply_block_stack, uniform_block)

GEOMETRIC_TOP_EXPONENT = 9


def modulo(v, range_: float) -> np.ndarray:
    """``v - R*floor(v/R)``, always in ``[0, R)``."""
    if not range_ > 0:
        raise ModelError(f"modulo period must be positive, got {range_}")
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ModelError("modulo input has non-finite entries")
    out = v - range_ * np.floor(v / range_)
    # -tiny maps to R - tiny, which can round to R itself
    out[out >= range_] = 0.0
    out[out < 0] = 0.0
    return out


def quantize(v, delta: float) -> np.ndarray:
    """1-bit quantizer: 0 where ``v <= delta``, 1 above.

    Defined on ``[0, inf)`` so that gains above one stay meaningful.
    """
    if not delta > 0:
        raise ModelError(f"delta must be positive, got {delta}")
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ModelError("quantizer input must be finite and nonnegative")
    return (v > delta).astype(np.uint8)


def harmonic_multipliers(k: int, first_bit: int) -> list[float]:
    """Gains ``[1, k/(k-1), ..., k]`` after a 0 bit, ``[1, k/(k+1), ..., k/(2k-1)]`` after a 1."""
    if k < 1:
        raise ModelError(f"k must be >= 1, got {k}")
    if first_bit not in (0, 1):
        raise ModelError("first_bit must be 0 or 1")
    sign = -1 if first_bit == 0 else 1
    return [1.0] + [k / (k + sign * j) for j in range(1, k)]


def _branch_gains(k: int) -> tuple[np.ndarray, np.ndarray]:
    j = np.arange(k, dtype=np.float64)
    return k / (k - j), k / (k + j)


def harmonic_stack(first_bits, k: int) -> BlockDiagStack:
    """Adaptive C: per-scalar gain column picked by that scalar's first bit."""
    first_bits = np.asarray(first_bits)
    inc, dec = _branch_gains(k)
    gains = np.where(first_bits[None, :] == 0, inc[:, None], dec[:, None])
    return BlockDiagStack(gains, StackKind.C_HARMONIC_ADAPTIVE)


def nonadaptive_stack(p: int, k: int) -> BlockDiagStack:
    """Fixed C with ``2k-1`` looks: gain 1, then the increasing branch, then the decreasing one."""
    inc, dec = _branch_gains(k)
    col = np.concatenate([[1.0], inc[1:], dec[1:]])
    return BlockDiagStack(np.repeat(col[:, None], p, axis=1), StackKind.C_HARMONIC_NONADAPTIVE)


def _check_u(u, delta):
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1:
        raise ShapeError("u must be one-dimensional")
    if np.any(~np.isfinite(u)) or np.any(u < 0) or np.any(u > 2 * delta):
        raise ModelError(f"quantizer inputs must lie in [0, {2 * delta}]")
    return u


def measure_adaptive(u, k: int, delta: float) -> BitMeasurements:
    u = _check_u(u, delta)
    first = quantize(u, delta)
    bits = quantize(apply_block_stack(harmonic_stack(first, k), u), delta)
    return BitMeasurements(bits, Mode.ADAPTIVE, k, u.shape[0])


def measure_nonadaptive(u, k: int, delta: float) -> BitMeasurements:
    u = _check_u(u, delta)
    bits = quantize(apply_block_stack(nonadaptive_stack(u.shape[0], k), u), delta)
    return BitMeasurements(bits, Mode.NONADAPTIVE, k, u.shape[0])


def measure(u, k: int, delta: float, mode=Mode.ADAPTIVE) -> BitMeasurements:
    if Mode(mode) is Mode.ADAPTIVE:
        return measure_adaptive(u, k, delta)
    return measure_nonadaptive(u, k, delta)


def select_adaptive(y: BitMeasurements) -> BitMeasurements:
    """Pick, per scalar, the branch of a non-adaptive record that matches its first bit."""
    if y.mode is Mode.ADAPTIVE:
        return y
    k = y.k
    table = y.as_table()
    first = table[0]
    inc, dec = table[1:k], table[k:]
    chosen = np.where(first[None, :] == 0, inc, dec)
    return BitMeasurements(np.vstack([first[None, :], chosen]).reshape(-1), Mode.ADAPTIVE, k, y.p)


class DKind(str, Enum):
    RANDOM = "random"
    GEOMETRIC = "geometric"
    ONES = "ones"


def build_D(config: ModelConfig, kind, T: float | None = None) -> BlockDiagStack:
    """Modulo-stage gains.

    ``random``: entries uniform on ``[-T, T]`` from the seeded D stream, index
    ``r*q + i``.  ``geometric``: block ``r`` (1-based) constant ``2**(9-r)``.
    ``ones``: single unit block, the plain dequantization setting.
    """
    kind = DKind(kind)
    kp, q = config.k_prime, config.q
    if kind is DKind.RANDOM:
        if T is None or not T > 0 or not np.isfinite(T):
            raise ModelError(f"random D needs a positive bound T, got {T}")
        g = uniform_block(config.seed, Stream.D_GAINS, 0, kp * q, -T, T).reshape(kp, q)
        return BlockDiagStack(g, StackKind.D_RANDOM)
    if kind is DKind.GEOMETRIC:
        if kp > GEOMETRIC_TOP_EXPONENT:
            raise ModelError(f"geometric D supports k_prime <= {GEOMETRIC_TOP_EXPONENT}, got {kp}")
        consts = 2.0 ** (GEOMETRIC_TOP_EXPONENT - np.arange(1, kp + 1))
        return BlockDiagStack(np.repeat(consts[:, None], q, axis=1), StackKind.D_GEOMETRIC)
    if kp != 1:
        raise ModelError("ones D is a single block; set k_prime = 1")
    return BlockDiagStack(np.ones((1, q)), StackKind.GENERIC)


class BKind(str, Enum):
    IDENTITY = "identity"
    SUBSAMPLED_DCT = "subsampled_unitary_times_signs"
    GAUSSIAN = "dense_gaussian"


@dataclass(frozen=True, eq=False)
class SensingMatrix:
    """Matrix-free ``B`` (``q x n``).

    The subsampled kind is ``P F S``: ``S`` a seeded +-1 diagonal, ``F`` the
    orthonormal DCT-II, ``P`` a seeded choice of ``q`` distinct rows.
    """

    kind: BKind
    n: int
    q: int
    rows: np.ndarray | None = None
    signs: np.ndarray | None = None
    dense: np.ndarray | None = None

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise ShapeError(f"B expects length {self.n}, got {x.shape}")
        if self.kind is BKind.IDENTITY:
            return x.copy()
        if self.kind is BKind.GAUSSIAN:
            return self.dense @ x
        return self.full_apply(x)[self.rows]

    def adjoint(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.q,):
            raise ShapeError(f"B^T expects length {self.q}, got {y.shape}")
        if self.kind is BKind.IDENTITY:
            return y.copy()
        if self.kind is BKind.GAUSSIAN:
            return self.dense.T @ y
        full = np.zeros(self.n)
        full[self.rows] = y
        return self.signs * sfft.idct(full, norm="ortho")

    def full_apply(self, x) -> np.ndarray:
        """Unsubsampled transform (orthonormal for the DCT kind)."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind is BKind.SUBSAMPLED_DCT:
            return sfft.dct(self.signs * x, norm="ortho")
        return self.apply(x)

    def columns(self, support) -> np.ndarray:
        """Dense ``q x |support|`` block of B."""
        support = np.asarray(support, dtype=np.intp)
        if self.kind is BKind.GAUSSIAN:
            return self.dense[:, support]
        if self.kind is BKind.IDENTITY:
            out = np.zeros((self.q, support.size))
            out[support, np.arange(support.size)] = 1.0
            return out
        eye = np.zeros((support.size, self.n))
        eye[np.arange(support.size), support] = self.signs[support]
        return sfft.dct(eye, norm="ortho", axis=1)[:, self.rows].T

    def matrix(self) -> np.ndarray:
        return self.columns(np.arange(self.n))


def build_B(config: ModelConfig, kind=BKind.IDENTITY) -> SensingMatrix:
    kind = BKind(kind)
    n, q = config.n, config.q
    if kind is BKind.IDENTITY:
        if q != n:
            raise ShapeError(f"identity B needs q == n, got q={q}, n={n}")
        return SensingMatrix(kind, n, q)
    if q > n:
        raise ShapeError(f"q={q} exceeds n={n}")
    if kind is BKind.GAUSSIAN:
        rng = np.random.Generator(np.random.Philox(key=[config.seed, int(Stream.B_ROWS)]))
        return SensingMatrix(kind, n, q, dense=rng.standard_normal((q, n)) / np.sqrt(q))
    keys = uniform_block(config.seed, Stream.B_ROWS, 0, n)
    rows = np.sort(np.argsort(keys, kind="stable")[:q])
    signs = np.where(uniform_block(config.seed, Stream.B_SIGNS, 0, n) < 0.5, -1.0, 1.0)
    for a in (rows, signs):
        a.setflags(write=False)
    return SensingMatrix(kind, n, q, rows=rows, signs=signs)


@dataclass(frozen=True, eq=False)
class ForwardResult:
    """Measurements plus the hidden intermediates.

    ``u`` and ``z`` are oracle-only: the reconstruction path never reads them.
    """

    y: BitMeasurements
    u: np.ndarray
    z: np.ndarray


def forward_model(x, config: ModelConfig, D: BlockDiagStack, B: SensingMatrix,
                  mode=None) -> ForwardResult:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (config.n,):
        raise ShapeError(f"x must have length n={config.n}, got {x.shape}")
    if D.block_size != config.q or D.num_blocks != config.k_prime:
        raise ShapeError("D does not match (k_prime, q) of the config")
    if B.n != config.n or B.q != config.q:
        raise ShapeError("B does not match (q, n) of the config")
    z = B.apply(x)
    u = modulo(apply_block_stack(D, z), config.range)
    y = measure(u, config.k, config.delta, config.mode if mode is None else mode)
    return ForwardResult(y, u, z)
