"""Deterministic 8-bit grayscale test scenes.

A scene is a smooth illumination field with overlapping flat shapes and a little
fine texture, i.e. piecewise smooth like a photograph, which keeps Haar
sparsification meaningful.  Values are integers in [0, 255].
"""
from __future__ import annotations

import numpy as np

from .core import Stream


def _smooth_field(rng, side, cutoff):
    noise = rng.standard_normal((side, side))
    f = np.fft.fftfreq(side)
    radius = np.hypot(f[:, None], f[None, :])
    spec = np.fft.fft2(noise) * np.exp(-(radius / cutoff) ** 2)
    field = np.fft.ifft2(spec).real
    return (field - field.mean()) / (field.std() + 1e-12)


def synthetic_scene(side: int = 256, seed: int = 0) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(key=[seed, int(Stream.SCENE)]))
    yy, xx = np.mgrid[0:side, 0:side] / side
    img = 110 + 60 * (0.6 * xx + 0.4 * yy - 0.5) + 25 * _smooth_field(rng, side, 0.03)
    for _ in range(14):
        cx, cy = rng.uniform(0.05, 0.95, 2)
        level = rng.uniform(30, 235)
        if rng.uniform() < 0.5:
            ax, ay = rng.uniform(0.04, 0.25, 2)
            mask = ((xx - cx) / ax) ** 2 + ((yy - cy) / ay) ** 2 <= 1
        else:
            hx, hy = rng.uniform(0.03, 0.2, 2)
            mask = (np.abs(xx - cx) <= hx) & (np.abs(yy - cy) <= hy)
        shade = 1 + 0.15 * (xx - cx) / 0.25
        img = np.where(mask, level * shade, img)
    img += 6 * _smooth_field(rng, side, 0.35)
    return np.clip(np.rint(img), 0, 255)


def rgb_to_gray(rgb) -> np.ndarray:
    """ITU-R BT.601 luma of an ``(h, w, 3)`` array, rounded to 8-bit levels."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected an (h, w, 3) array, got {rgb.shape}")
    return np.clip(np.rint(rgb @ np.array([0.299, 0.587, 0.114])), 0, 255)
