import numpy as np
import pytest
import scipy.linalg

from modrecon.core import ModelConfig, ModelError, ShapeError
from modrecon.forward import build_B
from modrecon.sparse import (HaarBasis, cosamp, cosamp_run, haar2d_forward, haar2d_inverse,
                             keep_largest, least_squares_on_support, sparsify)


def _sparse_problem(seed, n=1024, q=400, s=20, kind="subsampled_unitary_times_signs"):
    B = build_B(ModelConfig(n=n, q=q, k_prime=1, k=1, delta=1.0, seed=seed), kind)
    rng = np.random.default_rng(seed)
    x = np.zeros(n)
    supp = rng.choice(n, s, replace=False)
    x[supp] = rng.standard_normal(s)
    return B, x, supp


class TestLeastSquares:
    def test_single_column(self, rng):
        B, _, _ = _sparse_problem(1, n=128, q=60)
        z = rng.standard_normal(60)
        c, info = least_squares_on_support(B, [17], z)
        b = B.columns([17])[:, 0]
        assert c[0] == pytest.approx(b @ z / (b @ b), rel=1e-10) and info.converged

    def test_orthonormal_columns(self, rng):
        B = build_B(ModelConfig(n=64, q=64, k_prime=1, k=1, delta=1.0))
        z = rng.standard_normal(64)
        c, _ = least_squares_on_support(B, [3, 9, 40], z)
        assert np.allclose(c, z[[3, 9, 40]], atol=1e-12)

    @pytest.mark.parametrize("kind", ["subsampled_unitary_times_signs", "dense_gaussian"])
    def test_against_qr(self, rng, kind):
        B, _, _ = _sparse_problem(2, n=256, q=80, kind=kind)
        support = np.sort(rng.choice(256, 10, replace=False))
        z = rng.standard_normal(80)
        c, info = least_squares_on_support(B, support, z)
        Q, R = scipy.linalg.qr(B.columns(support), mode="economic")
        oracle = scipy.linalg.solve_triangular(R, Q.T @ z)
        assert np.max(np.abs(c - oracle)) <= 1e-8 * max(1.0, np.abs(oracle).max())
        assert not info.fallback

    def test_residual_orthogonal(self, rng):
        B, _, _ = _sparse_problem(3, n=256, q=80)
        support = np.sort(rng.choice(256, 30, replace=False))
        z = rng.standard_normal(80)
        c, _ = least_squares_on_support(B, support, z)
        cols = B.columns(support)
        r = z - cols @ c
        assert np.linalg.norm(cols.T @ r) <= 1e-8 * np.linalg.norm(cols) * np.linalg.norm(z)

    def test_stalled_cg_falls_back(self, rng):
        class Dense:
            def __init__(self, M):
                self.M, (self.q, self.n) = M, M.shape

            def apply(self, x):
                return self.M @ x

            def adjoint(self, y):
                return self.M.T @ y

            def columns(self, support):
                return self.M[:, support]

        M = rng.standard_normal((40, 6))
        M[:, 1] = M[:, 0]  # duplicated column: singular normal equations
        z = rng.standard_normal(40)
        c, info = least_squares_on_support(Dense(M), np.arange(6), z, max_iters=1)
        assert info.fallback and np.all(np.isfinite(c))
        # the ridge solve still fits as well as the exact minimum-norm solution
        best = np.linalg.lstsq(M, z, rcond=None)[0]
        assert np.linalg.norm(z - M @ c) <= np.linalg.norm(z - M @ best) * (1 + 1e-6)


class TestCosamp:
    def test_exact_recovery(self):
        ok = 0
        for seed in range(100):
            B, x, supp = _sparse_problem(seed)
            state = cosamp_run(B.apply(x), B, 20)
            exact = set(state.support.tolist()) == set(supp.tolist())
            ok += exact and np.linalg.norm(state.estimate - x) <= 1e-8 * np.linalg.norm(x)
        assert ok >= 95

    def test_identity_full(self, rng):
        B = build_B(ModelConfig(n=32, q=32, k_prime=1, k=1, delta=1.0))
        z = rng.standard_normal(32)
        assert np.allclose(cosamp(z, B, 32), z, atol=1e-12)

    def test_zero_input(self):
        B, _, _ = _sparse_problem(5, n=128, q=50, s=5)
        state = cosamp_run(np.zeros(50), B, 5)
        assert not state.estimate.any() and state.iteration <= 1 and state.converged

    def test_exactly_s_sparse_and_residual(self, rng):
        B, x, _ = _sparse_problem(6, n=512, q=200, s=15)
        z = B.apply(x) + 0.05 * rng.standard_normal(200)
        state = cosamp_run(z, B, 15, max_iters=10)
        assert np.count_nonzero(state.estimate) == 15
        assert np.allclose(state.residual, z - B.apply(state.estimate), atol=1e-10)

    @pytest.mark.parametrize("seed", range(10))
    def test_residual_nonincreasing(self, seed):
        B, x, _ = _sparse_problem(seed, n=512, q=200, s=15)
        norms = cosamp_run(B.apply(x), B, 15).residual_norms
        assert all(b <= a * (1 + 1e-9) + 1e-12 for a, b in zip(norms[1:], norms[2:]))

    def test_bad_sparsity(self):
        B, _, _ = _sparse_problem(7, n=64, q=20)
        with pytest.raises(ModelError):
            cosamp(np.zeros(20), B, 21)


class TestHaar:
    def test_constant_image(self):
        c = haar2d_forward(np.full((16, 16), 3.0))
        assert np.count_nonzero(np.abs(c) > 1e-12) == 1 and c[0, 0] == pytest.approx(48.0)

    def test_round_trip_and_energy(self, rng):
        img = rng.uniform(0, 255, (64, 64))
        c = haar2d_forward(img)
        assert np.max(np.abs(haar2d_inverse(c) - img)) < 1e-10
        assert abs(np.sum(c**2) - np.sum(img**2)) <= 1e-10 * np.sum(img**2)

    @pytest.mark.parametrize("shape", [(6, 6), (8, 4), (8,)])
    def test_shape_rejected(self, shape):
        with pytest.raises(ShapeError):
            haar2d_forward(np.zeros(shape))

    def test_basis(self, rng):
        basis = HaarBasis(8)
        img = rng.standard_normal((8, 8))
        assert np.allclose(basis.synthesize(basis.analyze(img)), img, atol=1e-12)


class TestSparsify:
    def test_full(self, rng):
        img = rng.uniform(0, 255, (16, 16))
        assert np.allclose(HaarBasis(16).synthesize(sparsify(img, 256)), img, atol=1e-10)

    def test_constant_single_term(self):
        img = np.full((32, 32), 7.0)
        assert np.allclose(HaarBasis(32).synthesize(sparsify(img, 1)), img, atol=1e-12)

    def test_energy_grows_with_s(self, rng):
        img = rng.uniform(0, 255, (32, 32))
        energy = [np.sum(sparsify(img, s) ** 2) for s in (1, 5, 20, 100, 500, 1024)]
        assert all(b >= a for a, b in zip(energy, energy[1:]))

    def test_ties_to_lower_index(self):
        out = keep_largest(np.array([1.0, -2.0, 2.0, 2.0]), 2)
        assert out.tolist() == [0.0, -2.0, 2.0, 0.0]
