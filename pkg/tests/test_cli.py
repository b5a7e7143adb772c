import filecmp
import json

import numpy as np
import pytest

from modrecon.cli import main
from modrecon.harness import (COLUMNS, ConfigError, RunConfig, comparable, read_csv_rows,
                              replay_row)
from modrecon.io import read_bits, read_sidecar, read_vector, save_pgm
from modrecon.scene import synthetic_scene


@pytest.fixture
def pgm(tmp_path):
    path = tmp_path / "img.pgm"
    save_pgm(synthetic_scene(32, seed=2), path)
    return path


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"scenario": "rqm", "k": 6}))
    return path


def _simulate(tmp_path, cfg, pgm, *extra):
    out = tmp_path / "y.bits"
    assert main(["simulate", "--config", str(cfg), "--in", str(pgm), "--out", str(out), *extra]) == 0
    return out


class TestCommands:
    def test_simulate_writes_bits_and_sidecar(self, tmp_path, cfg, pgm):
        out = _simulate(tmp_path, cfg, pgm, "--seed", "3")
        meta = read_sidecar(out)
        for key in ("mode", "k", "k_prime", "delta", "range", "seed", "b_kind", "d_kind", "T"):
            assert key in meta
        assert meta["seed"] == 3 and meta["k"] == 6 and meta["range"] == 2 * meta["delta"]
        assert read_bits(out).size == meta["m"] == 6 * 4 * 1024
        assert len(meta["image_sha256"]) == 64

    def test_stage_by_stage_equals_pipeline(self, tmp_path, cfg, pgm):
        bits = _simulate(tmp_path, cfg, pgm)
        u, z, x = (tmp_path / n for n in ("u.vec", "z.vec", "x.vec"))
        assert main(["dequantize", "--in", str(bits), "--out", str(u)]) == 0
        assert main(["recover", "--in", str(u), "--out", str(z)]) == 0
        assert main(["pipeline", "--in", str(bits), "--out", str(x),
                     "--image-out", str(tmp_path / "x.pgm")]) == 0
        assert np.array_equal(read_vector(z), read_vector(x))
        assert read_sidecar(z)["source"]["command"] == "dequantize"
        assert (tmp_path / "x.pgm").read_bytes()[:2] == b"P5"

    def test_recover_variants(self, tmp_path, pgm):
        c = tmp_path / "m.json"
        c.write_text(json.dumps({"scenario": "rqm_multishot", "k": 5}))
        bits = _simulate(tmp_path, c, pgm)
        u = tmp_path / "u.vec"
        assert main(["dequantize", "--in", str(bits), "--out", str(u), "--point-rule", "midpoint"]) == 0
        for variant in ("multishot", "sine", "complex"):
            out = tmp_path / f"z-{variant}.vec"
            assert main(["recover", "--in", str(u), "--out", str(out), "--variant", variant]) == 0
            assert read_vector(out).size == 1024
        assert read_sidecar(tmp_path / "z-multishot.vec")["failed_scalars"] == 0

    def test_pipeline_reproducible(self, tmp_path, cfg, pgm):
        bits = _simulate(tmp_path, cfg, pgm)
        a, b = tmp_path / "a.vec", tmp_path / "b.vec"
        for out in (a, b):
            assert main(["--threads", "2", "pipeline", "--in", str(bits), "--out", str(out)]) == 0
        assert filecmp.cmp(a, b, shallow=False)

    def test_resimulate_from_sidecar(self, tmp_path, cfg, pgm):
        bits = _simulate(tmp_path, cfg, pgm, "--seed", "11")
        meta = read_sidecar(bits)
        c2 = tmp_path / "c2.json"
        c2.write_text(json.dumps(meta["run"]))
        again = tmp_path / "again.bits"
        assert main(["simulate", "--config", str(c2), "--in", meta["image"], "--out", str(again)]) == 0
        assert filecmp.cmp(bits, again, shallow=False)

    def test_seed_env_fallback(self, tmp_path, cfg, pgm, monkeypatch):
        monkeypatch.setenv("MODRECON_SEED", "77")
        assert read_sidecar(_simulate(tmp_path, cfg, pgm))["seed"] == 77
        assert read_sidecar(_simulate(tmp_path, cfg, pgm, "--seed", "5"))["seed"] == 5

    def test_selftest(self, capsys):
        assert main(["selftest"]) == 0
        assert capsys.readouterr().out.count("PASS") == 7


class TestBench:
    def test_row_count_contract(self, tmp_path):
        out = tmp_path / "b.csv"
        assert main(["bench", "--scenario", "dequant_only", "--k", "3,5,7,9,11", "--trials", "5",
                     "--out", str(out)]) == 0
        text = out.read_text()
        rows = read_csv_rows(text)
        data = [r for r in rows if r["trial"] not in ("mean", "std")]
        assert len(data) == 25 and len(rows) == 35
        assert text.splitlines()[0] == ",".join(COLUMNS) and "\r" not in text
        err = {int(r["k"]): float(r["err_x"]) for r in rows if r["trial"] == "mean"}
        assert err[5] <= 0.10 and err[9] <= 0.05

    def test_replay_bit_identical(self, tmp_path, capsys):
        out = tmp_path / "b.csv"
        assert main(["bench", "--scenario", "rqm", "--k", "3,7", "--trials", "2",
                     "--image", "synthetic:32", "--seed", "9", "--out", str(out)]) == 0
        first = read_csv_rows(out.read_text())
        assert main(["bench", "--replay", str(out) + ".json"]) == 0
        second = read_csv_rows(capsys.readouterr().out)
        strip = lambda rows: [tuple(r[c] for c in COLUMNS if c != "runtime") for r in rows]
        assert strip(first) == strip(second)
        meta = read_sidecar(out)
        row = replay_row(meta, 7, 1)
        recorded = next(r for r in first if r["k"] == "7" and r["trial"] == "1")
        assert comparable(row) == tuple(recorded[c] for c in COLUMNS if c != "runtime")

    def test_set_override(self, capsys):
        assert main(["bench", "--scenario", "rqm", "--k", "4", "--trials", "1",
                     "--image", "synthetic:16", "--set", "tau=2", "--set", "point_rule=midpoint"]) == 0
        assert len(read_csv_rows(capsys.readouterr().out)) == 3


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        assert main(["simulate", "--bogus"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_missing_input(self, tmp_path):
        assert main(["dequantize", "--in", str(tmp_path / "none"), "--out", str(tmp_path / "o")]) == 1

    def test_bad_config_key(self, tmp_path, pgm):
        c = tmp_path / "bad.json"
        c.write_text(json.dumps({"kk": 3}))
        assert main(["simulate", "--config", str(c), "--in", str(pgm), "--out", str(tmp_path / "y")]) == 1

    def test_bad_pgm(self, tmp_path, cfg):
        p = tmp_path / "bad.pgm"
        p.write_bytes(b"P5\n1 1\n65535\n\x00\x00")
        assert main(["simulate", "--config", str(cfg), "--in", str(p), "--out", str(tmp_path / "y")]) == 1

    def test_bench_without_scenario(self):
        assert main(["bench"]) == 1

    def test_runtime_failure(self, monkeypatch, tmp_path, cfg, pgm):
        import modrecon.cli as cli

        def boom(*a, **k):
            raise RuntimeError("disk on fire")
        monkeypatch.setattr(cli, "simulate", boom)
        assert main(["simulate", "--config", str(cfg), "--in", str(pgm), "--out", str(tmp_path / "y")]) == 2

    def test_help(self):
        assert main(["--help"]) == 0


class TestRunConfig:
    def test_unknown_keys(self):
        with pytest.raises(ConfigError, match="kk"):
            RunConfig.from_dict({"kk": 1})

    @pytest.mark.parametrize("data", [{"k": "5"}, {"k": 5.0}, {"tau": "x"}, {"mode": "sometimes"},
                                      {"scenario": "nope"}, {"k": True}])
    def test_types(self, data):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(data)

    def test_scenario_preset_then_override(self):
        run = RunConfig.from_dict({"scenario": "rqm_multishot", "k_prime": 2})
        assert run.d_kind == "geometric" and run.k_prime == 2

    def test_round_trip(self):
        run = RunConfig.from_dict({"scenario": "rqm_sparse", "seed": 3})
        assert RunConfig.from_dict(run.to_dict()) == run
