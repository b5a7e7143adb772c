"""Sparse recovery (CoSaMP) and the Haar basis used to sparsify images."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .core import ModelError, ShapeError

log = logging.getLogger(__name__)


class LinearOperator(Protocol):
    n: int
    q: int

    def apply(self, x) -> np.ndarray: ...

    def adjoint(self, y) -> np.ndarray: ...

    def columns(self, support) -> np.ndarray: ...


@dataclass
class LstsqInfo:
    iterations: int
    converged: bool
    fallback: bool = False


def least_squares_on_support(B: LinearOperator, support, z_hat, *, x0=None, tol=1e-12,
                             max_iters=None, ridge=1e-10):
    """Minimise ``||z_hat - B[:, support] c||`` by conjugate gradients on the normal equations.

    Returns ``(c, info)``.  When CG stalls the problem is re-solved densely
    with a small ridge term and ``info.fallback`` is set.
    """
    support = np.asarray(support, dtype=np.intp)
    z_hat = np.asarray(z_hat, dtype=np.float64)
    m = support.size
    if m == 0:
        return np.zeros(0), LstsqInfo(0, True)
    if m > B.q:
        raise ShapeError(f"support of {m} columns exceeds the {B.q} rows of B")
    max_iters = max_iters or max(50, 4 * m)

    def op(c):
        full = np.zeros(B.n)
        full[support] = c
        return B.apply(full)

    def op_t(r):
        return B.adjoint(r)[support]

    c = np.zeros(m) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    r = z_hat - op(c) if c.any() else z_hat.copy()
    s = op_t(r)
    p = s.copy()
    gamma = s @ s
    target = tol * max(np.linalg.norm(op_t(z_hat)), np.finfo(float).tiny)
    it = 0
    converged = np.sqrt(gamma) <= target
    while not converged and it < max_iters:
        w = op(p)
        ww = w @ w
        if ww <= 0:
            break
        alpha = gamma / ww
        c += alpha * p
        r -= alpha * w
        s = op_t(r)
        gamma_new = s @ s
        it += 1
        converged = np.sqrt(gamma_new) <= target
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    if converged:
        return c, LstsqInfo(it, True)
    cols = B.columns(support)
    gram = cols.T @ cols
    gram[np.diag_indices_from(gram)] += ridge * max(np.trace(gram) / m, 1.0)
    c = np.linalg.solve(gram, cols.T @ z_hat)
    log.debug("least squares fell back to a ridge solve on %d columns", m)
    return c, LstsqInfo(it, False, fallback=True)


@dataclass
class CosampState:
    estimate: np.ndarray
    support: np.ndarray
    residual: np.ndarray
    iteration: int
    residual_norms: list = field(default_factory=list)
    fallbacks: int = 0
    converged: bool = False


def _top(values, count):
    # largest magnitudes, ties to the lower index
    order = np.argsort(-np.abs(values), kind="stable")
    return np.sort(order[:count])


def cosamp_run(z_hat, B: LinearOperator, s: int, max_iters: int = 50, tol: float = 1e-6) -> CosampState:
    """CoSaMP with full state: identify ``2s`` proxy entries, merge, solve, prune to ``s``."""
    z_hat = np.asarray(z_hat, dtype=np.float64)
    if z_hat.shape != (B.q,):
        raise ShapeError(f"z_hat must have length q={B.q}")
    if not 1 <= s <= B.q:
        raise ModelError(f"sparsity must satisfy 1 <= s <= q, got s={s}, q={B.q}")
    x = np.zeros(B.n)
    support = np.zeros(0, dtype=np.intp)
    r = z_hat.copy()
    znorm = np.linalg.norm(z_hat)
    state = CosampState(x, support, r, 0, [float(znorm)])
    if znorm == 0:
        state.converged = True
        return state
    for it in range(1, max_iters + 1):
        proxy = B.adjoint(r)
        merged = np.union1d(_top(proxy, min(2 * s, B.n)), support)
        if merged.size > B.q:
            weight = np.abs(proxy[merged]) + np.abs(x[merged])
            merged = merged[_top(weight, B.q)]
        coef, info = least_squares_on_support(B, merged, z_hat, x0=x[merged])
        state.fallbacks += info.fallback
        keep = _top(coef, s)
        x = np.zeros(B.n)
        x[merged[keep]] = coef[keep]
        support = merged[keep]
        r = z_hat - B.apply(x)
        rn = np.linalg.norm(r)
        state.residual_norms.append(float(rn))
        state.estimate, state.support, state.residual, state.iteration = x, support, r, it
        if rn <= tol * znorm:
            state.converged = True
            break
    return state


def cosamp(z_hat, B: LinearOperator, s: int, max_iters: int = 50, tol: float = 1e-6) -> np.ndarray:
    return cosamp_run(z_hat, B, s, max_iters, tol).estimate


def _check_square_pow2(image):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] != image.shape[1]:
        raise ShapeError(f"Haar transform needs a square image, got {image.shape}")
    side = image.shape[0]
    if side < 1 or side & (side - 1):
        raise ShapeError(f"image side must be a power of two, got {side}")
    return image


_SQRT_HALF = np.sqrt(0.5)


def haar2d_forward(image) -> np.ndarray:
    """Full-depth orthonormal 2-D Haar transform, Mallat layout (approximation top-left)."""
    out = _check_square_pow2(image).copy()
    m = out.shape[0]
    while m > 1:
        block = out[:m, :m]
        a = (block[:, 0::2] + block[:, 1::2]) * _SQRT_HALF
        d = (block[:, 0::2] - block[:, 1::2]) * _SQRT_HALF
        block = np.hstack([a, d])
        a = (block[0::2] + block[1::2]) * _SQRT_HALF
        d = (block[0::2] - block[1::2]) * _SQRT_HALF
        out[:m, :m] = np.vstack([a, d])
        m //= 2
    return out


def haar2d_inverse(coeffs) -> np.ndarray:
    out = _check_square_pow2(coeffs).copy()
    side = out.shape[0]
    m = 2
    while m <= side:
        h = m // 2
        block = out[:m, :m]
        a, d = block[:h], block[h:]
        rows = np.empty_like(block)
        rows[0::2] = (a + d) * _SQRT_HALF
        rows[1::2] = (a - d) * _SQRT_HALF
        a, d = rows[:, :h], rows[:, h:]
        cols = np.empty_like(block)
        cols[:, 0::2] = (a + d) * _SQRT_HALF
        cols[:, 1::2] = (a - d) * _SQRT_HALF
        out[:m, :m] = cols
        m *= 2
    return out


class HaarBasis:
    """Image <-> flattened coefficient vector.  Any object with the same two methods can stand in."""

    def __init__(self, side: int):
        _check_square_pow2(np.zeros((side, side)))
        self.side = side

    def analyze(self, image) -> np.ndarray:
        return haar2d_forward(image).reshape(-1)

    def synthesize(self, coeffs) -> np.ndarray:
        return haar2d_inverse(np.asarray(coeffs, dtype=np.float64).reshape(self.side, self.side))


def keep_largest(coeffs, s: int) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if not 0 <= s <= coeffs.size:
        raise ModelError(f"s must lie in [0, {coeffs.size}]")
    out = np.zeros_like(coeffs)
    idx = _top(coeffs.reshape(-1), s)
    out.reshape(-1)[idx] = coeffs.reshape(-1)[idx]
    return out


def sparsify(image, s: int) -> np.ndarray:
    """Keep the ``s`` largest Haar coefficients; returns the flattened coefficient vector."""
    image = _check_square_pow2(image)
    return keep_largest(HaarBasis(image.shape[0]).analyze(image), s)
