"""Command-line front end.

Exit codes: 0 success, 1 invalid input or usage, 2 runtime failure.
Randomness comes from ``--seed``, else ``$MODRECON_SEED``, else the config.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from . import __version__
from .core import BitMeasurements, FreqGrid, ModelError
from .dequant import PointRule, hm_dequantize
from .harness import (SCENARIOS, ConfigError, RunConfig, assemble, bench_sidecar, bench_sweep,
                      image_record, load_image, prepare, reconstruct, replay, rows_to_csv,
                      simulate)
from .io import (FormatError, read_bits, read_sidecar, read_vector, save_pgm, write_bits,
                 write_sidecar, write_vector)
from .modrec import Variant, recover_z, recover_z_multishot

log = logging.getLogger("modrecon")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _seed(args, fallback):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("MODRECON_SEED")
    if env:
        try:
            return int(env, 0)
        except ValueError:
            raise ConfigError(f"MODRECON_SEED={env!r} is not an integer") from None
    return fallback


def _load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc.msg}", exc.pos) from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return RunConfig.from_dict(data)


def _measurement_meta(meta) -> dict:
    # walk back to the simulate record through nested sources
    while meta.get("command") != "simulate":
        if "source" not in meta:
            raise FormatError("sidecar chain does not lead back to a simulate record")
        meta = meta["source"]
    return meta


def _problem_from(meta):
    sim = _measurement_meta(meta)
    return assemble(RunConfig.from_dict(sim["run"]), sim["shape"])


def cmd_simulate(args):
    run = _load_config(args.config)
    run = replace(run, seed=_seed(args, run.seed))
    if args.k is not None:
        run = replace(run, k=args.k)
    image = load_image(args.input)
    problem = prepare(run, image)
    fwd = simulate(problem)
    write_bits(args.out, fwd.y.bits)
    cfg = problem.config
    meta = {"command": "simulate", "version": __version__, "run": problem.run.to_dict(),
            "shape": list(problem.shape), "n": cfg.n, "q": cfg.q, "p": cfg.p, "m": cfg.m,
            "mode": cfg.mode.value, "k": cfg.k, "k_prime": cfg.k_prime, "delta": cfg.delta,
            "range": cfg.range, "seed": cfg.seed, "b_kind": problem.run.b_kind,
            "d_kind": problem.run.d_kind, "T": problem.run.T}
    meta.update(image_record(args.input))
    write_sidecar(args.out, meta)
    log.info("wrote %d bits to %s", fwd.y.bits.size, args.out)


def _read_measurements(path):
    meta = read_sidecar(path)
    sim = _measurement_meta(meta)
    bits = read_bits(path)
    return BitMeasurements(bits, sim["mode"], sim["k"], sim["p"]), sim


def cmd_dequantize(args):
    y, sim = _read_measurements(args.input)
    rule = args.point_rule or sim["run"]["point_rule"]
    seed = _seed(args, sim["seed"])
    u_hat = hm_dequantize(y, sim["delta"], point_rule=rule, seed=seed)
    write_vector(args.out, u_hat)
    write_sidecar(args.out, {"command": "dequantize", "version": __version__, "point_rule": rule,
                             "seed": seed, "input": os.path.abspath(args.input), "source": sim})


def cmd_recover(args):
    meta = read_sidecar(args.input)
    problem = _problem_from(meta)
    u_hat = read_vector(args.input)
    g = problem.grid
    grid = FreqGrid(g.lo if args.grid_lo is None else args.grid_lo,
                    g.hi if args.grid_hi is None else args.grid_hi,
                    g.resolution if args.grid_res is None else args.grid_res)
    failed = None
    if args.variant == "multishot":
        res = recover_z_multishot(u_hat, problem.D, problem.config.range, grid, k=problem.config.k)
        z_hat, failed = res.z_hat, res.failed
    else:
        z_hat = recover_z(u_hat, problem.D, problem.config.range, grid, Variant(args.variant),
                          threads=args.threads)
    write_vector(args.out, z_hat)
    extra = {} if failed is None else {"failed_scalars": int(failed.sum())}
    write_sidecar(args.out, {"command": "recover", "version": __version__, "variant": args.variant,
                             "grid": [grid.lo, grid.hi, grid.resolution],
                             "input": os.path.abspath(args.input), "source": meta, **extra})


def cmd_pipeline(args):
    y, sim = _read_measurements(args.input)
    problem = _problem_from(sim)
    if args.point_rule:
        problem = replace(problem, run=replace(problem.run, point_rule=args.point_rule))
    report = reconstruct(problem, y, threads=args.threads)
    write_vector(args.out, report.x_hat)
    meta = {"command": "pipeline", "version": __version__, "input": os.path.abspath(args.input),
            "point_rule": problem.run.point_rule, "source": sim,
            "timings": {k: round(v, 6) for k, v in report.timings.items()}}
    if report.failed is not None:
        meta["failed_scalars"] = int(report.failed.sum())
    write_sidecar(args.out, meta)
    if args.image_out:
        save_pgm(problem.image_from(report.x_hat), args.image_out)


def _parse_ks(text):
    try:
        ks = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--k expects comma-separated integers, got {text!r}") from None
    if not ks or min(ks) < 1:
        raise UsageError("--k needs at least one positive integer")
    return ks


def _parse_sets(items):
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def cmd_bench(args):
    if args.replay:
        with open(args.replay, encoding="utf-8") as fh:
            meta = json.load(fh)
        rows = replay(meta, threads=args.threads)
    else:
        if not args.scenario:
            raise UsageError("bench needs --scenario (or --replay)")
        overrides = {"scenario": args.scenario, **_parse_sets(args.set)}
        if args.k_prime is not None:
            overrides["k_prime"] = args.k_prime
        settings = RunConfig.from_dict(overrides)
        ks = _parse_ks(args.k)
        image_spec = args.image or ("synthetic:512" if args.scenario == "dequant_only" else "synthetic:64")
        base_seed = _seed(args, 0)
        rows = bench_sweep(settings, load_image(image_spec), ks, args.trials, base_seed, args.threads)
        meta = bench_sidecar(settings, image_spec, ks, args.trials, base_seed)
    text = rows_to_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        if not args.replay:
            write_sidecar(args.out, meta)
    else:
        sys.stdout.write(text)


def cmd_selftest(args):
    from .selftest import run_selftest
    failures = run_selftest(verbose=not args.quiet)
    if failures:
        raise RuntimeError(f"selftest: {failures} check(s) failed")


def build_parser():
    p = _Parser(prog="modrecon", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--threads", type=int, default=1, help="worker cap")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="acquire 1-bit modulo measurements of an image")
    s.add_argument("--config", help="RunConfig JSON")
    s.add_argument("--in", dest="input", required=True, help="PGM path or synthetic:SIDE[:SEED]")
    s.add_argument("--out", required=True, help="bit file (sidecar written next to it)")
    s.add_argument("--seed", type=int)
    s.add_argument("--k", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("dequantize", help="bits -> u_hat")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--point-rule", choices=[r.value for r in PointRule])
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_dequantize)

    s = sub.add_parser("recover", help="u_hat -> z_hat")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--variant", choices=["complex", "sine", "multishot"], default="complex")
    s.add_argument("--grid-lo", type=float)
    s.add_argument("--grid-hi", type=float)
    s.add_argument("--grid-res", type=float)
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("pipeline", help="bits -> x_hat (all stages)")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--image-out", help="also write the reconstruction as PGM")
    s.add_argument("--point-rule", choices=[r.value for r in PointRule])
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("bench", help="error-vs-k sweep as CSV")
    s.add_argument("--scenario", choices=sorted(SCENARIOS))
    s.add_argument("--k", default="3,5,7,9,11")
    s.add_argument("--k-prime", type=int)
    s.add_argument("--trials", type=int, default=5)
    s.add_argument("--image", help="PGM path or synthetic:SIDE[:SEED]")
    s.add_argument("--seed", type=int)
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="RunConfig override")
    s.add_argument("--out", help="CSV path (sidecar written next to it); stdout if omitted")
    s.add_argument("--replay", metavar="SIDECAR", help="re-run a recorded bench")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("selftest", help="run the invariant checks and a golden round trip")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("modrecon: --threads must be >= 1", file=sys.stderr)
        return 1
    for name in ("input",):
        if getattr(args, name, None) and args.command != "simulate" and not os.path.exists(getattr(args, name)):
            print(f"modrecon: no such file: {getattr(args, name)}", file=sys.stderr)
            return 1
    try:
        args.func(args)
    except (UsageError, ModelError, FormatError, IndexError, FileNotFoundError) as exc:
        print(f"modrecon: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"modrecon: runtime failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
