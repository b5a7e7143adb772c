"""Experiment plumbing: run configs, scenario presets and the error-vs-k sweep.

A :class:`RunConfig` is the JSON-facing description of one acquisition and
reconstruction.  :func:`prepare` turns it plus an image into concrete
operators, filling every ``None`` ("auto") field so the resolved config alone
reproduces the run.
"""
from __future__ import annotations

import csv
import io as _io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from . import __version__
from .core import FreqGrid, Mode, ModelConfig, ModelError, seed_from
from .dequant import PointRule
from .forward import (GEOMETRIC_TOP_EXPONENT, BKind, DKind, ForwardResult, build_B, build_D,
                      forward_model)
from .io import file_sha256, load_pgm
from .modrec import alias_guard_ok, multishot_range
from .pipeline import GroundTruth, PipelineVariant, rqm
from .scene import synthetic_scene
from .sparse import HaarBasis, sparsify


class ConfigError(ModelError):
    """Invalid or unknown run-config entries."""


@dataclass(frozen=True)
class RunConfig:
    k: int = 5
    k_prime: int = 4
    delta: float | None = None
    sparsity: int = 0
    q: int | None = None
    seed: int = 0
    mode: str = "adaptive"
    d_kind: str = "random"
    T: float | None = None
    tau: float = 1.0
    b_kind: str = "identity"
    variant: str = "mf_complex"
    point_rule: str = "random"
    grid_lo: float | None = None
    grid_hi: float | None = None
    grid_res: float = 1e-3
    input_scale: float = 1 / 255
    zmax_margin: float = 1.1
    refine: int | None = None
    scenario: str | None = None

    def __post_init__(self):
        for name, enum in (("mode", Mode), ("d_kind", DKind), ("b_kind", BKind),
                           ("variant", PipelineVariant), ("point_rule", PointRule)):
            try:
                enum(getattr(self, name))
            except ValueError:
                allowed = ", ".join(e.value for e in enum)
                raise ConfigError(f"{name}={getattr(self, name)!r} is not one of: {allowed}") from None
        if self.scenario is not None and self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.tau <= 0 or self.grid_res <= 0 or self.input_scale <= 0:
            raise ConfigError("tau, grid_res and input_scale must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        scenario = data.get("scenario")
        if scenario is not None and scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {scenario!r}; have {', '.join(sorted(SCENARIOS))}")
        base = dict(SCENARIOS[scenario]) if scenario else {}
        base.update(data)
        for name, value in base.items():
            if value is None:
                continue
            want = known[name].type
            if "int" in want and "float" not in want and not (isinstance(value, int)
                                                              and not isinstance(value, bool)):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
            if "float" in want and (isinstance(value, bool) or not isinstance(value, (int, float))):
                raise ConfigError(f"{name} must be a number, got {value!r}")
            if want.startswith("str") and not isinstance(value, str):
                raise ConfigError(f"{name} must be a string, got {value!r}")
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)


SCENARIOS = {
    "dequant_only": dict(k_prime=1, delta=128.0, d_kind="ones", b_kind="identity", sparsity=0,
                         variant="none", input_scale=1.0, grid_lo=0.0, grid_hi=255.0),
    "rqm": dict(k_prime=4, d_kind="random", b_kind="identity", sparsity=0, variant="mf_complex"),
    "rqm_multishot": dict(k_prime=3, d_kind="geometric", b_kind="identity", sparsity=0,
                          variant="multishot"),
    "rqm_sparse": dict(k_prime=4, d_kind="random", b_kind=BKind.SUBSAMPLED_DCT.value,
                       sparsity=100, q=2000, variant="mf_complex"),
    "rqm_multishot_sparse": dict(k_prime=3, d_kind="geometric", b_kind=BKind.SUBSAMPLED_DCT.value,
                                 sparsity=100, q=2000, variant="multishot"),
}


@dataclass(frozen=True, eq=False)
class Problem:
    run: RunConfig
    config: ModelConfig
    D: object
    B: object
    grid: FreqGrid
    x: np.ndarray
    shape: tuple

    def image_from(self, x_hat) -> np.ndarray:
        """Map a signal estimate back to pixel units."""
        x_hat = np.asarray(x_hat, dtype=np.float64)
        if self.run.sparsity > 0:
            img = HaarBasis(self.shape[0]).synthesize(x_hat)
        else:
            img = x_hat.reshape(self.shape)
        return img / self.run.input_scale


def _round_up(value, step):
    return math.ceil(value / step - 1e-9) * step


def prepare(run: RunConfig, image) -> Problem:
    """Resolve ``run`` against ``image`` (pixel values) into operators and the true signal."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ConfigError("input image must be two-dimensional")
    n = image.size
    q = run.q or n
    scaled = image * run.input_scale
    if run.sparsity > 0:
        x = sparsify(scaled, run.sparsity)
    else:
        x = scaled.reshape(-1)
    # B depends only on (n, q, seed, kind); delta is a placeholder here
    B = build_B(ModelConfig(n=n, q=q, k_prime=run.k_prime, k=run.k, delta=1.0,
                            sparsity=run.sparsity, seed=run.seed), run.b_kind)

    lo, hi = run.grid_lo, run.grid_hi
    if lo is None or hi is None:
        if run.sparsity > 0:
            zb = _round_up(run.zmax_margin * float(np.abs(B.apply(x)).max()), 0.01) or 0.01
            auto = (-zb, zb)
        else:
            auto = (0.0, 255.0 * run.input_scale)
        lo = auto[0] if lo is None else lo
        hi = auto[1] if hi is None else hi
    grid = FreqGrid(float(lo), float(hi), run.grid_res)

    delta = run.delta
    if delta is None:
        if DKind(run.d_kind) is DKind.GEOMETRIC:
            coarsest = 2.0 ** (GEOMETRIC_TOP_EXPONENT - run.k_prime)
            delta = multishot_range(grid, coarsest, run.k) / 2
        else:
            delta = 1.0
    T = run.T
    if DKind(run.d_kind) is DKind.RANDOM and T is None:
        T = run.tau * 2 * delta / max(grid.hi - grid.lo, grid.resolution)
    resolved = replace(run, q=q, delta=float(delta), T=None if T is None else float(T),
                       grid_lo=grid.lo, grid_hi=grid.hi)
    return assemble(resolved, image.shape, x, B)


def assemble(run: RunConfig, shape, x=None, B=None) -> Problem:
    """Operators for an already resolved config (no ``None`` fields left that matter)."""
    shape = tuple(int(s) for s in shape)
    n = int(np.prod(shape))
    if run.delta is None or run.grid_lo is None or run.grid_hi is None:
        raise ConfigError("config is not resolved: delta and grid bounds must be set")
    q = run.q or n
    config = ModelConfig(n=n, q=q, k_prime=run.k_prime, k=run.k, delta=float(run.delta),
                         sparsity=run.sparsity, seed=run.seed, mode=run.mode)
    if B is None:
        B = build_B(config, run.b_kind)
    grid = FreqGrid(float(run.grid_lo), float(run.grid_hi), run.grid_res)
    D = build_D(config, run.d_kind, run.T)
    if DKind(run.d_kind) is DKind.RANDOM:
        alias_guard_ok(run.T, grid, config.range)
    return Problem(run, config, D, B, grid, x, shape)


def simulate(problem: Problem) -> ForwardResult:
    return forward_model(problem.x, problem.config, problem.D, problem.B)


def reconstruct(problem: Problem, y, ground_truth=None, threads=1):
    run = problem.run
    return rqm(y, problem.config, problem.D, problem.B, problem.grid, run.variant, ground_truth,
               point_rule=run.point_rule, refine=run.refine, threads=threads)


# --- images -----------------------------------------------------------------

def load_image(spec: str) -> np.ndarray:
    """``synthetic:SIDE[:SEED]`` or a path to a P5 PGM."""
    if spec.startswith("synthetic:"):
        parts = spec.split(":")[1:]
        try:
            side = int(parts[0])
            seed = int(parts[1]) if len(parts) > 1 else 0
        except (ValueError, IndexError):
            raise ConfigError(f"bad synthetic image spec {spec!r}") from None
        return synthetic_scene(side, seed)
    return load_pgm(spec)


def image_record(spec: str) -> dict:
    rec = {"image": spec}
    if not spec.startswith("synthetic:"):
        rec["image_sha256"] = file_sha256(spec)
        rec["image"] = os.path.abspath(spec)
    return rec


# --- bench ------------------------------------------------------------------

COLUMNS = ("scenario", "k", "k_prime", "trial", "seed", "err_u", "err_z", "err_x", "runtime")
# wall-clock; excluded when rows are compared for reproducibility
NONDETERMINISTIC = ("runtime",)


def trial_seed(base_seed: int, trial: int) -> int:
    """Same across k, so every k of one trial shares its D, B and signs."""
    return seed_from(base_seed, trial)


def run_trial(settings: RunConfig, image, k: int, trial: int, base_seed: int, threads=1) -> dict:
    seed = trial_seed(base_seed, trial)
    problem = prepare(replace(settings, k=k, seed=seed), image)
    fwd = simulate(problem)
    truth = GroundTruth(problem.x, fwd.z, fwd.u)
    t0 = time.perf_counter()
    report = reconstruct(problem, fwd.y, truth, threads=threads)
    runtime = time.perf_counter() - t0
    e = report.errors
    return {"scenario": settings.scenario or "custom", "k": k, "k_prime": settings.k_prime,
            "trial": trial, "seed": seed, "err_u": e["err_u"], "err_z": e["err_z"],
            "err_x": e["err_x"], "runtime": runtime}


def summarize(rows) -> list[dict]:
    out = []
    ks = sorted({r["k"] for r in rows})
    for k in ks:
        sel = [r for r in rows if r["k"] == k]
        for label, fn in (("mean", np.mean), ("std", np.std)):
            rec = {"scenario": sel[0]["scenario"], "k": k, "k_prime": sel[0]["k_prime"],
                   "trial": label, "seed": ""}
            for col in ("err_u", "err_z", "err_x", "runtime"):
                rec[col] = float(fn([r[col] for r in sel]))
            out.append(rec)
    return out


def bench_sweep(settings: RunConfig, image, ks, trials: int, base_seed: int = 0,
                threads: int = 1) -> list[dict]:
    """One row per (k, trial), ordered by k then trial."""
    jobs = [(k, t) for k in ks for t in range(trials)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(lambda kt: run_trial(settings, image, kt[0], kt[1], base_seed), jobs))
    else:
        rows = [run_trial(settings, image, k, t, base_seed) for k, t in jobs]
    return rows


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows, summary=True) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in list(rows) + (summarize(rows) if summary else []):
        w.writerow([_fmt(r[c]) for c in COLUMNS])
    return buf.getvalue()


def read_csv_rows(text: str) -> list[dict]:
    return list(csv.DictReader(_io.StringIO(text)))


def bench_sidecar(settings: RunConfig, image_spec: str, ks, trials, base_seed) -> dict:
    meta = {"command": "bench", "version": __version__, "settings": settings.to_dict(),
            "ks": list(ks), "trials": trials, "seed": base_seed, "columns": list(COLUMNS)}
    meta.update(image_record(image_spec))
    return meta


def _from_sidecar(meta: dict):
    if meta.get("command") != "bench":
        raise ConfigError("sidecar does not describe a bench run")
    settings = RunConfig.from_dict(meta["settings"])
    image = load_image(meta["image"])
    if "image_sha256" in meta and file_sha256(meta["image"]) != meta["image_sha256"]:
        raise ConfigError(f"image {meta['image']} changed since the bench was recorded")
    return settings, image


def replay(meta: dict, threads: int = 1) -> list[dict]:
    settings, image = _from_sidecar(meta)
    return bench_sweep(settings, image, meta["ks"], meta["trials"], meta["seed"], threads)


def replay_row(meta: dict, k: int, trial: int) -> dict:
    settings, image = _from_sidecar(meta)
    return run_trial(settings, image, k, trial, meta["seed"])


def comparable(row: dict) -> tuple:
    """Row as formatted strings without the wall-clock column."""
    return tuple(_fmt(row[c]) if not isinstance(row[c], str) else row[c]
                 for c in COLUMNS if c not in NONDETERMINISTIC)
