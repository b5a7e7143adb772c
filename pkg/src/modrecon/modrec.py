"""Modulo recovery: estimate ``z`` from dequantized wrapped samples ``u_hat``.

For scalar ``l`` the ``k'`` looks ``u_hat[l::q]`` were taken at gains
``t = D[:, l]``.  Mapping the modulo period onto the unit circle,
``exp(2*pi*i*u/R) = exp(2*pi*i*t*z/R)``, so recovering ``z_l`` is a frequency
estimate from ``k'`` irregular time samples, solved by exhaustive grid search.
The geometric-gain alternative unwraps coarse to fine instead.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .core import BlockDiagStack, FreqGrid, ModelError, ShapeError

ALIAS_GUARD = 50.0


class Variant(str, Enum):
    COMPLEX = "complex"
    SINE = "sine"


@dataclass(frozen=True, eq=False)
class MatchedFilterProblem:
    phases: np.ndarray
    times: np.ndarray
    grid: FreqGrid
    variant: Variant
    range_: float


def _split(u_hat, D: BlockDiagStack):
    u_hat = np.asarray(u_hat, dtype=np.float64)
    if u_hat.shape != (D.num_blocks * D.block_size,):
        raise ShapeError(f"u_hat length {u_hat.shape} does not match D "
                         f"({D.num_blocks} blocks of {D.block_size})")
    return u_hat.reshape(D.num_blocks, D.block_size)


def _phases(u, range_, variant):
    ang = (2.0 * np.pi / range_) * u
    if variant is Variant.SINE:
        return np.sin(ang)
    return np.exp(1j * ang)


def build_problem(u_hat, D: BlockDiagStack, l: int, range_: float, grid: FreqGrid,
                  variant=Variant.COMPLEX) -> MatchedFilterProblem:
    """Phases and gains of scalar ``l`` (0-based)."""
    variant = Variant(variant)
    table = _split(u_hat, D)
    if not 0 <= l < D.block_size:
        raise IndexError(f"scalar index {l} outside [0, {D.block_size})")
    return MatchedFilterProblem(_phases(table[:, l], range_, variant), D.column(l).copy(),
                                grid, variant, float(range_))


def _search(phases, times, grid: FreqGrid, range_, variant, backend, refine=None):
    search = kernels.get(backend)
    L = times.shape[0]
    times = np.ascontiguousarray(times, dtype=np.float64)
    if variant is Variant.SINE:
        pre, pim = np.ascontiguousarray(phases, dtype=np.float64), np.zeros(times.shape)
    else:
        pre = np.ascontiguousarray(phases.real)
        pim = np.ascontiguousarray(phases.imag)
    scale = 2.0 * np.pi / range_
    G = len(grid)
    zeros = np.zeros(L, dtype=np.int64)
    if not refine or refine <= 1 or G <= 4 * refine:
        idx, score = search(pre, pim, times, grid.lo, grid.resolution, G, zeros, scale, variant is Variant.SINE)
    else:
        f = int(refine)
        coarse_g = (G - 1) // f + 1
        cidx, _ = search(pre, pim, times, grid.lo, grid.resolution * f, coarse_g, zeros, scale,
                         variant is Variant.SINE)
        span = min(G, 2 * f + 1)
        start = np.clip(cidx * f - f, 0, G - span).astype(np.int64)
        idx, score = search(pre, pim, times, grid.lo, grid.resolution, span, start, scale,
                            variant is Variant.SINE)
    if variant is Variant.COMPLEX:
        score = np.sqrt(score)
    return grid.points[idx], score


def matched_filter(problem: MatchedFilterProblem, backend=None):
    """``(z_hat, score)``: grid value maximising the template correlation; ties go to the smaller value."""
    if len(problem.grid) == 0:
        raise ModelError("empty grid")
    v, s = _search(problem.phases[None, :], problem.times[None, :], problem.grid,
                   problem.range_, problem.variant, backend)
    return float(v[0]), float(s[0])


def recover_z(u_hat, D: BlockDiagStack, range_: float, grid: FreqGrid, variant=Variant.COMPLEX,
              *, refine: int | None = None, threads: int = 1, backend=None, return_scores=False):
    """Matched-filter estimate of every ``z_l``.

    ``refine=f`` first scans every ``f``-th grid point, then the ``2f+1`` points
    around the coarse winner; it matches the exhaustive scan when the main lobe
    is wider than ``f`` steps, as on noiseless data.
    """
    variant = Variant(variant)
    table = _split(u_hat, D)
    phases = _phases(table.T, range_, variant)
    times = D.gains.T
    q = D.block_size
    threads = max(1, int(threads))
    if threads == 1 or q < 2 * threads:
        z, s = _search(phases, times, grid, range_, variant, backend, refine)
    else:
        bounds = np.linspace(0, q, threads + 1).astype(int)
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(
                lambda ab: _search(phases[ab[0]:ab[1]], times[ab[0]:ab[1]], grid, range_, variant,
                                   backend, refine),
                zip(bounds[:-1], bounds[1:])))
        z = np.concatenate([p[0] for p in parts])
        s = np.concatenate([p[1] for p in parts])
    return (z, s) if return_scores else z


def alias_guard_ok(T: float, grid: FreqGrid, range_: float, *, warn=True) -> bool:
    """Check ``T * max|grid| <= 50 R`` for random gains on ``[-T, T]``."""
    ok = T * grid.max_abs <= ALIAS_GUARD * range_
    if not ok and warn:
        warnings.warn(f"T*max|grid| = {T * grid.max_abs:g} exceeds {ALIAS_GUARD:g}*R; "
                      "matched-filter sidelobes may dominate", RuntimeWarning, stacklevel=2)
    return ok


@dataclass(frozen=True, eq=False)
class MultishotResult:
    z_hat: np.ndarray
    failed: np.ndarray
    wraps: np.ndarray


def multishot_range(grid: FreqGrid, coarsest_gain: float, k: int, margin: float = 1 / 32) -> float:
    """Smallest convenient modulo period for which the coarsest look never wraps ambiguously.

    With ``grid.lo == 0`` the lift window is ``[0, R)`` and ``R`` only has to
    exceed ``gain * hi``.  Otherwise the window start is rounded down to a
    dequantization cell edge, which costs up to one cell (``R / 2k``).
    """
    span = coarsest_gain * (grid.hi - min(grid.lo, 0.0))
    if grid.lo >= 0:
        return span * (1 + margin)
    return span * (2 * k) / (2 * k - 1) * (1 + margin)


def recover_z_multishot(u_hat, D: BlockDiagStack, range_: float, grid: FreqGrid,
                        k: int | None = None) -> MultishotResult:
    """Coarse-to-fine unwrapping for positive gains.

    The smallest-gain look is lifted into the window ``[W, W + R)`` with
    ``W = gain * grid.lo`` (rounded down to a cell edge of width ``R/2k`` when
    ``k`` is given, so an estimate and its truth always land on the same side).
    Each larger-gain look then picks the wrap count closest to the running
    prediction.  ``failed`` flags scalars whose coarse look is ambiguous, whose
    wrap count exceeds the search bound, or whose result leaves the grid range.
    """
    table = _split(u_hat, D)
    gains = D.gains
    if np.any(gains <= 0):
        raise ModelError("multi-shot unwrapping requires strictly positive gains")
    q = D.block_size
    order = np.argsort(gains, axis=0, kind="stable")
    cols = np.arange(q)
    g_sorted = gains[order, cols]
    u_sorted = table[order, cols]
    cell = range_ / (2 * k) if k else 0.0

    g0, u0 = g_sorted[0], u_sorted[0]
    start = grid.lo * g0
    if cell:
        start = np.floor(start / cell) * cell
    w0 = np.ceil((start - u0) / range_)
    lifted = u0 + w0 * range_
    # ceil can land one period high when u0 sits exactly on the window start
    lifted = np.where(lifted >= start + range_, lifted - range_, lifted)
    z = lifted / g0
    failed = grid.hi * g0 >= start + range_

    wmax = math.ceil(float(g_sorted.max()) * grid.max_abs / range_) + 1
    wraps = np.zeros_like(table)
    wraps[order[0], cols] = np.rint((lifted - u0) / range_)
    for r in range(1, D.num_blocks):
        g, u = g_sorted[r], u_sorted[r]
        w = np.rint((g * z - u) / range_)
        failed |= np.abs(w) > wmax
        w = np.clip(w, -wmax, wmax)
        z = (u + w * range_) / g
        wraps[order[r], cols] = w
    g_top = g_sorted[-1]
    tol = (cell if cell else range_ / 2) / g_top * (1 + 1e-9)
    failed |= (z < grid.lo - tol) | (z > grid.hi + tol)
    return MultishotResult(z, failed, wraps.astype(np.int64))
