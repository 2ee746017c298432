"""Command-line entry point: ``tlgamp {validate,estimate,sweep}``.

Exit codes: 0 success, 1 configuration error, 2 divergence during
``estimate`` (dumps are still written), 3 output I/O error.

The base seed comes from ``--seed``, else from the ``TLGAMP_SEED``
environment variable, else from ``harness.base_seed`` in the config file.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, format_config, load_config, parse_config
from .gamp import write_trace_csv
from .harness import SWEEP_AXES, run_manifest, run_trial, sweep, trial_seed, write_manifest

SEED_ENV = "TLGAMP_SEED"
EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3

# headers of the files written by ``estimate``
PATH_COLUMNS = ("antenna", "belief", "true_visible", "t_hat_re", "t_hat_im", "truth_re", "truth_im", "t_var")
ANGULAR_COLUMNS = ("index", "c_hat_re", "c_hat_im")
SUMMARY_COLUMNS = ("path", "aod_rad", "iterations", "converged", "diverged", "beta_hat", "nmse_db", "vr_accuracy")


def _err(msg: str):
    print(f"error: {msg}", file=sys.stderr)


def _load(path, seed):
    """Config from ``path`` (``-`` or None gives all defaults) with the seed override applied."""
    if path in (None, "-"):
        cfg = parse_config("", validate=False)
    else:
        try:
            cfg = load_config(path, validate=False)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
    if seed is None and os.environ.get(SEED_ENV, "").strip():
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {os.environ[SEED_ENV]!r}") from None
    if seed is not None:
        cfg.harness.base_seed = int(seed)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _num(x) -> str:
    # shortest repr that round-trips, so dumps reload bit-exactly
    return repr(float(x))


def cmd_validate(config_path, seed=None) -> int:
    try:
        cfg = _load(config_path, seed)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    print(format_config(cfg), end="")
    return EXIT_OK


def write_estimate_dump(result, dump_dir) -> list[Path]:
    """Per-path CSV files for one trial kept with ``keep_details=True``."""
    d = result.details
    out = Path(dump_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for l, est in enumerate(d["estimates"]):
        p = out / f"path{l}.csv"
        truth = d["truths"][l]
        t_var = est.t_var if est.t_var is not None else np.full(len(est.t_hat), np.nan)
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PATH_COLUMNS)
            for n in range(len(est.t_hat)):
                w.writerow([n, _num(est.s_belief[n]), int(d["masks"][l][n]), _num(est.t_hat[n].real),
                            _num(est.t_hat[n].imag), _num(truth[n].real), _num(truth[n].imag), _num(t_var[n])])
        written.append(p)
        p = out / f"path{l}_angular.csv"
        with open(p, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ANGULAR_COLUMNS)
            for q, c in enumerate(est.c_hat):
                w.writerow([q, _num(c.real), _num(c.imag)])
        written.append(p)
        p = out / f"path{l}_trace.csv"
        write_trace_csv(est, p)
        written.append(p)
    p = out / "summary.csv"
    with open(p, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for l, est in enumerate(d["estimates"]):
            err = np.sum(np.abs(est.t_hat - d["truths"][l]) ** 2) / max(np.sum(np.abs(d["truths"][l]) ** 2), 1e-300)
            w.writerow([l, _num(d["aods"][l]), est.iters_run, int(est.converged), int(est.diverged),
                        _num(est.beta_hat), f"{10 * np.log10(max(err, 1e-10)):.4f}",
                        f"{result.vr_accuracy[l]:.4f}"])
    written.append(p)
    return written


def cmd_estimate(config_path, seed=None, dump_dir="estimate_out", trial=0) -> int:
    try:
        cfg = _load(config_path, seed)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    s = trial_seed(cfg.harness.base_seed, trial)
    result = run_trial(cfg, s, keep_details=True)
    try:
        files = write_estimate_dump(result, dump_dir)
        write_manifest(Path(dump_dir) / "manifest.json", run_manifest(
            cfg, outputs={"dump_dir": dump_dir},
            extra={"trial_index": trial, "trial_seed": s, "nmse_db": result.nmse_db}))
    except OSError as exc:
        _err(f"cannot write dumps: {exc}")
        return EXIT_IO
    for est, value in result.nmse_db.items():
        print(f"{est:12s} {value:9.4f} dB")
    print(f"wrote {len(files) + 1} files to {dump_dir}")
    if result.diverged.get("tl_gamp"):
        _err("TL-GAMP diverged on at least one path (dumps hold the last accepted iterate)")
        return EXIT_DIVERGED
    return EXIT_OK


def _print_table(result):
    print(f"{'axis':>8s}  {'estimator':12s} {'median':>9s} {'p10':>9s} {'p90':>9s} {'n':>4s}")
    for r in result.rows:
        print(f"{r['axis_value']!s:>8s}  {r['estimator']:12s} {r['median_db']:9.3f} {r['p10_db']:9.3f} "
              f"{r['p90_db']:9.3f} {r['n']:4d}")


def cmd_sweep(config_path, axis, out_csv="sweep.csv", seed=None, workers=None) -> int:
    try:
        cfg = _load(config_path, seed)
        try:
            cfg.validate_axis(axis)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if workers is not None and workers < 1:
            raise ConfigError("--workers must be >= 1")
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    result = sweep(cfg, axis, workers=workers)
    out = Path(out_csv)
    manifest_path = out.with_suffix(".manifest.json")
    try:
        result.write_csv(out)
        write_manifest(manifest_path, run_manifest(cfg, result, outputs={"csv": out, "manifest": manifest_path}))
    except OSError as exc:
        _err(f"cannot write outputs: {exc}")
        return EXIT_IO
    _print_table(result)
    print(f"wrote {out} and {manifest_path}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1 (a configuration error); argparse's 2 means divergence here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tlgamp", description="Near-field XL-MIMO channel estimation with TL-GAMP.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", nargs="?", default="-", help="config file ('-' or omitted: all defaults)")
        p.add_argument("--seed", type=int, default=None, help=f"base seed (overrides {SEED_ENV} and the config)")

    p = sub.add_parser("validate", help="parse a config and print it with defaults resolved")
    common(p)
    p = sub.add_parser("estimate", help="run one trial and dump per-path estimates")
    common(p)
    p.add_argument("--out", default="estimate_out", help="dump directory")
    p.add_argument("--trial", type=int, default=0, help="trial index under the base seed")
    p = sub.add_parser("sweep", help="Monte Carlo sweep along one axis")
    common(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--out", default="sweep.csv", help="CSV path; the manifest goes next to it")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: harness.workers, else all cores)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args.config, args.seed)
    if args.command == "estimate":
        return cmd_estimate(args.config, args.seed, args.out, args.trial)
    return cmd_sweep(args.config, args.axis, args.out, args.seed, args.workers)


if __name__ == "__main__":
    sys.exit(main())
