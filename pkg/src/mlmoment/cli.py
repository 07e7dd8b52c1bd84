"""Command line interface: ``mlmoment run | sweep | verify``.

Configuration comes from a flat ``key = value`` file (``--config``) and/or
flags; flags win. Keys are the field names of
:class:`~mlmoment.experiment.ExperimentConfig`, with ``-`` and ``_``
interchangeable.

Exit codes: 0 success, 1 configuration error, 2 solver cap reached without
the global discrepancy stop (or an eigenvalue iteration that did not
converge), 3 I/O error, 4 failed verification.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, ConvergenceError
from .experiment import ExperimentConfig, emit_report, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_CAP, EXIT_IO, EXIT_VERIFY = 0, 1, 2, 3, 4

log = logging.getLogger("mlmoment")

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _base_type(annotation: str) -> str:
    # annotations are strings here (postponed evaluation)
    a = annotation.replace(" ", "")
    if a.startswith("Optional[") and a.endswith("]"):
        return a[len("Optional["):-1]
    return a


def _convert(key: str, text: str, annotation: str):
    kind = _base_type(annotation)
    optional = annotation.replace(" ", "").startswith("Optional[")
    if optional and text.strip().lower() in ("", "none", "null"):
        return None
    try:
        if kind == "bool":
            low = text.strip().lower()
            if low in _BOOL_TRUE:
                return True
            if low in _BOOL_FALSE:
                return False
            raise ValueError(text)
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r} (expected {kind})") from None
    return text.strip()


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    types = ExperimentConfig.field_types()
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, value, types[key])
    return out


def load_config_file(path) -> dict:
    with open(path) as fh:
        return parse_config_text(fh.read())


# flag name -> config field; values None mean "not given"
_FLAG_FIELDS = {
    "grid_size": int, "bandwidth": int, "samples": int, "irregularity": float,
    "noise": float, "delta": float, "method": str, "stop_flavor": str, "eta": float,
    "tau": float, "max_level": int, "max_iters_per_level": int, "tail_source": str,
    "bound_source": str, "residual_floor": float, "seed": int, "truth_seed": int,
    "sampling_seed": int, "noise_seed": int, "signal_file": str, "points_file": str,
    "measurements_file": str, "subsample": int, "out": str,
}


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="flat key = value config file")
    g = p.add_argument_group("experiment")
    g.add_argument("--grid-size", type=int, help="grid points L (default 1024)")
    g.add_argument("--bandwidth", type=int, help="degree M of the synthetic truth (default 30)")
    g.add_argument("--samples", type=int, help="number r of jittered samples (default 107)")
    g.add_argument("--irregularity", type=float, help="jitter in [0, 1) relative to the mean gap")
    g.add_argument("--noise", type=float,
                   help="noise-to-signal norm ratio of the samples, e.g. 0.12 for 12%% (default 0.12)")
    g.add_argument("--delta", type=float, help="noise bound; overrides the realized noise norm")
    g.add_argument("--method", choices=("cg", "lw"), help="multi-level CGNE or Landweber (default lw)")
    g.add_argument("--stop-flavor", choices=("cg_squared", "lw_linear", "lw_increment", "cg_with_lw_stop"))
    g.add_argument("--eta", type=float, help="discrepancy slack (default 0.1)")
    g.add_argument("--tau", type=float, help="global stop factor (default 1.5)")
    g.add_argument("--drop-factor-two", action="store_true", default=None,
                   help="use (1 + eta) instead of 2 (1 + eta) in the stopping rules")
    g.add_argument("--max-level", type=int)
    g.add_argument("--max-iters-per-level", type=int)
    g.add_argument("--tail-source", choices=("recursive", "known_truth"))
    g.add_argument("--bound-source", choices=("theoretical", "empirical"))
    g.add_argument("--residual-floor", type=float)
    g.add_argument("--seed", type=int, help="base seed (truth, sampling, noise use seed, +1, +2)")
    g.add_argument("--truth-seed", type=int)
    g.add_argument("--sampling-seed", type=int)
    g.add_argument("--noise-seed", type=int)
    g.add_argument("--signal-file", help="truth as CSV index,re,im")
    g.add_argument("--points-file", help="sampling points, one per line")
    g.add_argument("--measurements-file", help="measured data as CSV j,t,re,im (needs --delta)")
    g.add_argument("--subsample", type=int, help="keep every k-th sample")
    g.add_argument("--out", metavar="DIR", help="directory for report files")


def build_config(args: argparse.Namespace, overrides: dict | None = None) -> ExperimentConfig:
    values = load_config_file(args.config) if getattr(args, "config", None) else {}
    for name in _FLAG_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if getattr(args, "drop_factor_two", None):
        values["drop_factor_two"] = True
    values.update(overrides or {})
    return ExperimentConfig(**values)


def _print_summary(report, stream=None):
    stream = stream or sys.stdout
    s = report.summary()
    err = s["normalized_error"]
    print(f"final level      {s['final_level']}  ({s['termination']})", file=stream)
    print(f"iterations       {s['total_iterations']}", file=stream)
    print(f"samples          {s['samples']}  delta={s['delta']:.6g}", file=stream)
    print(f"max gap          {s['max_gap']:.6g}  ({s['max_gap_grid_units']:.2f} grid units)", file=stream)
    print(f"gap std          {s['gap_sigma']:.6g}  ({s['gap_sigma_grid_units']:.2f} grid units)", file=stream)
    print(f"nyquist level    {s['nyquist_level']}", file=stream)
    if err is not None:
        print(f"normalized error {err:.6g}", file=stream)


def cmd_run(args) -> int:
    cfg = build_config(args)
    report = run_experiment(cfg)
    _print_summary(report)
    if cfg.out:
        for path in emit_report(report, cfg.out):
            print(f"wrote {path}")
    return EXIT_CAP if report.result.termination == "level_cap" else EXIT_OK


def _sweep_one(cfg: ExperimentConfig) -> dict:
    report = run_experiment(cfg)
    return {"level": report.result.level, "termination": report.result.termination,
            "iterations": report.result.total_iterations,
            "error": report.normalized_error}


def cmd_sweep(args) -> int:
    base = build_config(args)
    key = args.param.replace("-", "_")
    types = ExperimentConfig.field_types()
    if key not in types:
        raise ConfigError(f"unknown sweep parameter {args.param!r}")
    values = [_convert(key, v, types[key]) for v in args.values.split(",")]
    configs = [replace(base, **{key: v}, out=None) for v in values]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_one, configs))
    else:
        rows = [_sweep_one(c) for c in configs]

    header = [key, "level", "termination", "iterations", "error"]
    print("\t".join(header))
    for v, row in zip(values, rows):
        err = "" if row["error"] is None else f"{row['error']:.6g}"
        print(f"{v}\t{row['level']}\t{row['termination']}\t{row['iterations']}\t{err}")
    errs = [r["error"] for r in rows if r["error"] is not None]
    if errs:
        print(f"# error mean {np.mean(errs):.6g}  min {np.min(errs):.6g}  max {np.max(errs):.6g}")
    if base.out:
        out = Path(base.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for v, row in zip(values, rows):
                wr.writerow([v, row["level"], row["termination"], row["iterations"],
                             "" if row["error"] is None else repr(float(row["error"]))])
        print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_checks

    results = run_checks(configs=args.configs, seed=args.seed or 0)
    ok = True
    for name, passed, detail in results:
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if ok else EXIT_VERIFY


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mlmoment",
                                description="Multi-level CGNE / Landweber reconstruction of "
                                            "band-limited periodic signals from irregular samples.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one reconstruction")
    _add_config_flags(run)
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="vary one parameter and aggregate errors")
    _add_config_flags(sweep)
    sweep.add_argument("--param", required=True, help="config key to vary, e.g. noise or seed")
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sweep.set_defaults(func=cmd_sweep)

    verify = sub.add_parser("verify", help="oracle-backed checks on small random instances")
    verify.add_argument("--configs", type=int, default=50)
    verify.add_argument("--seed", type=int, default=0)
    verify.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; that code is reserved here
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
