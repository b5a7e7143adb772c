import numpy as np
import pytest

from modrecon.core import FreqGrid, ModelConfig, ModelError, ShapeError
from modrecon.forward import build_B, build_D, forward_model, measure
from modrecon.harness import RunConfig, bench_sweep, prepare, reconstruct, simulate
from modrecon.pipeline import GroundTruth, normalized_error, rqm
from modrecon.scene import synthetic_scene

GRID = FreqGrid(0.0, 1.0, 1e-3)
SMALL = synthetic_scene(32, seed=1)


def _identity_setup(n, k, kind="random", kp=4, seed=0, delta=1.0):
    cfg = ModelConfig(n=n, q=n, k_prime=kp, k=k, delta=delta, seed=seed)
    D = build_D(cfg, kind, T=2.0 * delta if kind == "random" else None)
    return cfg, D, build_B(cfg)


def test_normalized_error():
    assert normalized_error([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert normalized_error([0.0, 0.0], [3.0, 4.0]) == pytest.approx(1.0)
    assert normalized_error([3.0, 4.0], [0.0, 0.0]) == pytest.approx(5.0)


def test_noiseless_round_trip_large_k():
    rng = np.random.default_rng(0)
    x = np.round(rng.uniform(0.1, 1.0, 128), 3)
    cfg, D, B = _identity_setup(128, k=512)
    fwd = forward_model(x, cfg, D, B)
    rep = rqm(fwd.y, cfg, D, B, GRID, ground_truth=GroundTruth(x, fwd.z, fwd.u))
    assert rep.errors["err_x"] <= GRID.resolution / x.min()


def test_zero_signal_multishot():
    k = 8
    cfg, D, B = _identity_setup(64, k, "geometric", kp=3, delta=33.0)
    fwd = forward_model(np.zeros(64), cfg, D, B)
    rep = rqm(fwd.y, cfg, D, B, GRID, "multishot")
    assert np.all(np.abs(rep.x_hat) <= (cfg.delta / k) / 256.0)


def test_zero_signal_dequant_only():
    cfg = ModelConfig(n=16, q=16, k_prime=1, k=6, delta=1.0)
    D, B = build_D(cfg, "ones"), build_B(cfg)
    fwd = forward_model(np.zeros(16), cfg, D, B)
    rep = rqm(fwd.y, cfg, D, B, GRID, "none", point_rule="midpoint")
    assert np.all(rep.x_hat == 1.0 / 12)


def test_error_fields_only_with_truth():
    cfg, D, B = _identity_setup(32, 5)
    y = forward_model(np.full(32, 0.5), cfg, D, B).y
    assert rqm(y, cfg, D, B, GRID).errors is None


def test_trend_in_k():
    settings = RunConfig.from_dict({"scenario": "rqm"})
    ks = [3, 5, 7, 9, 15]
    rows = bench_sweep(settings, SMALL, ks, trials=3, base_seed=2)
    mean = {k: np.mean([r["err_x"] for r in rows if r["k"] == k]) for k in ks}
    std = {k: np.std([r["err_x"] for r in rows if r["k"] == k]) for k in ks}
    for a, b in zip(ks, ks[1:]):
        assert mean[b] <= mean[a] + std[a]
    assert mean[15] < mean[3]


@pytest.mark.parametrize("scenario", ["dequant_only", "rqm", "rqm_multishot", "rqm_sparse",
                                      "rqm_multishot_sparse"])
def test_consistency_determinism_and_bound(scenario):
    overrides = {"scenario": scenario, "k": 6, "seed": 4}
    if "sparse" in scenario:
        overrides.update(q=400, sparsity=30)
    problem = prepare(RunConfig.from_dict(overrides), SMALL)
    fwd = simulate(problem)
    truth = GroundTruth(problem.x, fwd.z, fwd.u)
    rep = reconstruct(problem, fwd.y, truth)
    cfg = problem.config
    assert measure(rep.u_hat, cfg.k, cfg.delta, cfg.mode) == fwd.y
    again = reconstruct(problem, fwd.y, truth)
    assert np.array_equal(rep.x_hat, again.x_hat) and rep.errors == again.errors
    bound = cfg.delta / cfg.k * np.sqrt(cfg.p) / np.linalg.norm(fwd.u)
    assert rep.errors["err_u"] <= bound
    assert set(rep.timings) == {"dequantize", "modulo", "sparse"}


def test_nonadaptive_mode_runs():
    problem = prepare(RunConfig.from_dict({"scenario": "rqm", "k": 6, "mode": "nonadaptive"}), SMALL)
    fwd = simulate(problem)
    assert fwd.y.looks == 11
    rep = reconstruct(problem, fwd.y, GroundTruth(problem.x, fwd.z, fwd.u))
    assert measure(rep.u_hat, 6, problem.config.delta, "nonadaptive") == fwd.y


class TestErrors:
    def test_layout_mismatch(self):
        cfg, D, B = _identity_setup(16, 4)
        y = forward_model(np.zeros(16), cfg, D, B).y
        other = ModelConfig(n=16, q=16, k_prime=4, k=5, delta=1.0)
        with pytest.raises(ShapeError):
            rqm(y, other, D, B, GRID)

    def test_stage_label(self):
        cfg, D, B = _identity_setup(16, 4)
        y = forward_model(np.zeros(16), cfg, D, B).y
        with pytest.raises(ModelError, match=r"^\[modulo\]"):
            rqm(y, cfg, D, B, GRID, "none")

    def test_sparsity_zero_needs_identity(self):
        cfg = ModelConfig(n=64, q=32, k_prime=1, k=4, delta=1.0)
        D, B = build_D(cfg, "ones"), build_B(cfg, "subsampled_unitary_times_signs")
        y = forward_model(np.zeros(64), cfg, D, B).y
        with pytest.raises(ModelError, match=r"^\[sparse\]"):
            rqm(y, cfg, D, B, GRID, "none")
