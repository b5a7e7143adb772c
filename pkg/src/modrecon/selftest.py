"""Fast invariant checks plus a golden CLI round trip, for ``modrecon selftest``."""
from __future__ import annotations

import filecmp
import json
import os
import tempfile
from fractions import Fraction

import numpy as np

from .core import BlockDiagStack, FreqGrid, ModelConfig, StackKind
from .dequant import PointRule, decode_interval, hm_dequantize
from .forward import BKind, build_B, measure
from .modrec import recover_z, recover_z_multishot
from .sparse import cosamp, haar2d_forward, haar2d_inverse


def _partition():
    for k in range(1, 9):
        cells = set()
        for first in (0, 1):
            for j in range(1, k + 1):
                bits = [first] * j + [1 - first] * (k - j)
                iv = decode_interval(bits, Fraction(1), k)
                assert iv.hi - iv.lo == Fraction(1, k)
                cells.add((iv.lo, iv.hi))
        edges = sorted(cells)
        assert len(edges) == 2 * k and edges[0][0] == 0 and edges[-1][1] == 2
        assert all(a[1] == b[0] for a, b in zip(edges, edges[1:]))


def _bound_and_consistency():
    rng = np.random.default_rng(7)
    u = rng.uniform(0, 2.0, 10_000)
    for k in (1, 4, 16):
        for mode in ("adaptive", "nonadaptive"):
            y = measure(u, k, 1.0, mode)
            for rule in PointRule:
                u_hat = hm_dequantize(y, 1.0, point_rule=rule, seed=k)
                assert np.all(np.abs(u_hat - u) < 1.0 / k)
                assert measure(u_hat, k, 1.0, mode) == y


def _matched_filter():
    rng = np.random.default_rng(3)
    grid = FreqGrid(0.0, 1.0, 1e-3)
    z = grid.points[rng.integers(0, len(grid), 32)]
    D = BlockDiagStack(rng.uniform(-2, 2, (8, 32)), StackKind.D_RANDOM)
    u = np.mod(D.gains * z[None, :], 2.0).reshape(-1)
    assert np.array_equal(recover_z(u, D, 2.0, grid), z)


def _multishot():
    g = np.repeat([[256.0], [128.0], [64.0]], 16, axis=1)
    z = np.linspace(0, 0.99, 16)
    u = np.mod(g * z[None, :], 66.0).reshape(-1)
    res = recover_z_multishot(u, BlockDiagStack(g, StackKind.D_GEOMETRIC), 66.0, FreqGrid(0, 1, 1e-3))
    assert np.allclose(res.z_hat, z, atol=1e-12) and not res.failed.any()


def _cosamp():
    cfg = ModelConfig(n=256, q=120, k_prime=1, k=1, delta=1.0, seed=11)
    B = build_B(cfg, BKind.SUBSAMPLED_DCT)
    x = np.zeros(256)
    x[[3, 40, 77, 150, 201]] = [1.0, -2.0, 0.5, 3.0, -1.5]
    x_hat = cosamp(B.apply(x), B, 5)
    assert np.linalg.norm(x_hat - x) <= 1e-8 * np.linalg.norm(x)


def _haar():
    img = np.random.default_rng(5).uniform(0, 255, (32, 32))
    c = haar2d_forward(img)
    assert np.allclose(haar2d_inverse(c), img, atol=1e-10)
    assert abs(np.linalg.norm(c) - np.linalg.norm(img)) < 1e-9 * np.linalg.norm(img)


def _golden():
    from .cli import main
    with tempfile.TemporaryDirectory() as tmp:
        cfg = os.path.join(tmp, "c.json")
        with open(cfg, "w") as fh:
            json.dump({"scenario": "rqm", "k": 7}, fh)
        bits = os.path.join(tmp, "y.bits")
        out = [os.path.join(tmp, f"x{i}.vec") for i in (1, 2)]
        assert main(["simulate", "--config", cfg, "--in", "synthetic:32", "--out", bits, "--seed", "5"]) == 0
        for path in out:
            assert main(["pipeline", "--in", bits, "--out", path]) == 0
        assert filecmp.cmp(out[0], out[1], shallow=False)
        # re-acquire from the sidecar's resolved config alone
        with open(bits + ".json") as fh:
            meta = json.load(fh)
        cfg2 = os.path.join(tmp, "c2.json")
        with open(cfg2, "w") as fh:
            json.dump(meta["run"], fh)
        bits2 = os.path.join(tmp, "y2.bits")
        assert main(["simulate", "--config", cfg2, "--in", meta["image"], "--out", bits2]) == 0
        assert filecmp.cmp(bits, bits2, shallow=False)


CHECKS = [
    ("decoded intervals tile [0, 2*delta]", _partition),
    ("error bound and consistent reconstruction", _bound_and_consistency),
    ("matched filter, noiseless on-grid", _matched_filter),
    ("multi-shot unwrapping, exact input", _multishot),
    ("CoSaMP, noiseless", _cosamp),
    ("Haar round trip and energy", _haar),
    ("golden CLI round trip is bit-exact", _golden),
]


def run_selftest(verbose=True) -> int:
    failures = 0
    for name, check in CHECKS:
        try:
            check()
            status = "PASS"
        except AssertionError:
            status = "FAIL"
            failures += 1
        if verbose:
            print(f"{status}  {name}")
    return failures
