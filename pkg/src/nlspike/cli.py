"""Command-line interface.

    nlspike coeffs --f <name> --noise <name> --kmax <int>
    nlspike predict --f <name> --noise <name> --signal <name> --gamma0 <real>
    nlspike sweep|equivalence|rank-k|rectangular|spectrum --config <path>
            [--out <path>] [--workers <int>] [--seed <u64>] [--figures]

Exit codes: 0 on success, 1 on a configuration error, 2 when any replica
failed numerically (flagged rows are still written).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

from . import harness
from .coefficients import info_index, nonlinearity
from .distributions import noise_spec, signal_spec
from .harness import ConfigError, ExperimentConfig
from .theory import predict

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlspike",
        description="Numerical laboratory for entrywise non-linear spiked Wigner models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", help="information coefficients and index of a non-linearity")
    p.add_argument("--f", required=True, help="non-linearity name (e.g. abs, poly:0,-3,0,1)")
    p.add_argument("--noise", default="gaussian")
    p.add_argument("--kmax", type=int, default=8)
    p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("predict", help="closed-form transition prediction for one gamma0")
    p.add_argument("--f", required=True)
    p.add_argument("--noise", default="gaussian")
    p.add_argument("--signal", default="gaussian")
    p.add_argument("--gamma0", type=float, required=True)
    p.add_argument("--kmax", type=int, default=8)
    p.add_argument("--tol", type=float, default=None)

    for name, hlp in (
        ("sweep", "replica sweep over the (n, gamma0) grid"),
        ("equivalence", "operator norm of Y - Y0 - P per replica"),
        ("rank-k", "rank-K sweep plus perturbation rank report"),
        ("rectangular", "rectangular model symmetrization identities"),
        ("spectrum", "full-spectrum histogram of one realization"),
    ):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", required=True, help="path to a key = value config file")
        p.add_argument("--out", default=None, help="output file (default: config 'out' or stdout)")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        p.add_argument("--seed", type=int, default=None, help="override base_seed")
        p.add_argument("--figures", action="store_true", help="render figures next to --out")
        if name == "spectrum":
            p.add_argument("--bins", type=int, default=None)
        else:
            p.add_argument("--format", default="csv", choices=("csv", "json", "plotdata"))
    return parser


def _load(args, expected: str) -> ExperimentConfig:
    config = harness.load_config(args.config)
    if config.experiment != expected:
        raise ConfigError(
            f"config declares experiment {config.experiment!r}, command expects {expected!r}"
        )
    overrides = {}
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if getattr(args, "bins", None) is not None:
        overrides["bins"] = args.bins
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def _write(text: str, args, config: ExperimentConfig) -> str | None:
    out = args.out or config.out
    if out is None:
        sys.stdout.write(text)
        return None
    with open(out, "w", newline="") as fh:
        fh.write(text)
    return out


def _figure_path(out: str | None, suffix: str) -> str:
    if out is None:
        return suffix
    base, _, _ = out.rpartition(".")
    return (base or out) + "_" + suffix


def _rows_failed(rows) -> bool:
    return any(getattr(row, "error", "") for row in rows)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _dispatch(args) -> int:
    if args.command == "coeffs":
        try:
            f = nonlinearity(args.f)
            noise = noise_spec(args.noise)
            rep = info_index(f, noise, k_max=args.kmax, tol=args.tol)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        payload = {
            "theta": list(rep.theta),
            "k_star": rep.k_star if rep.k_star is not None else "none detected",
            "sigma": rep.sigma,
            "method": rep.method,
            "tol": rep.tolerance_used,
        }
        print(json.dumps(payload))
        return EXIT_OK

    if args.command == "predict":
        try:
            pred = predict(
                args.gamma0,
                nonlinearity(args.f),
                noise_spec(args.noise),
                signal_spec(args.signal),
                k_max=args.kmax,
                tol=args.tol,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        print(json.dumps(dataclasses.asdict(pred)))
        return EXIT_OK

    if args.command == "sweep":
        config = _load(args, "sweep")
        rows = harness.run_sweep(config, workers=args.workers)
        out = _write(harness.emit(rows, args.format, row_type=harness.SweepRow), args, config)
        if args.figures:
            from . import report

            report.sweep_figure(rows, _figure_path(out, "sweep.png"))
        return EXIT_NUMERICAL if _rows_failed(rows) else EXIT_OK

    if args.command == "equivalence":
        config = _load(args, "equivalence")
        rows = harness.run_equivalence(config, workers=args.workers)
        out = _write(harness.emit(rows, args.format, row_type=harness.EquivalenceRow), args, config)
        if args.figures:
            from . import report

            report.equivalence_figure(rows, _figure_path(out, "equivalence.png"))
        return EXIT_NUMERICAL if _rows_failed(rows) else EXIT_OK

    if args.command == "rank-k":
        config = _load(args, "rank_k")
        sweep_rows, rank_rows = harness.run_rank_k(config, workers=args.workers)
        out = _write(harness.emit(sweep_rows, args.format, row_type=harness.SweepRow), args, config)
        rank_text = harness.emit(rank_rows, args.format, row_type=harness.RankReportRow)
        if out is not None:
            base, _, ext = out.rpartition(".")
            rank_path = (base or out) + "_rank." + (ext or "csv")
            with open(rank_path, "w", newline="") as fh:
                fh.write(rank_text)
        else:
            sys.stdout.write(rank_text)
        if args.figures:
            from . import report

            report.sweep_figure(sweep_rows, _figure_path(out, "rank_k.png"))
        return EXIT_NUMERICAL if _rows_failed(sweep_rows) else EXIT_OK

    if args.command == "rectangular":
        config = _load(args, "rectangular")
        rows = harness.run_rectangular(config, workers=args.workers)
        _write(harness.emit(rows, args.format, row_type=harness.RectangularRow), args, config)
        return EXIT_NUMERICAL if _rows_failed(rows) else EXIT_OK

    if args.command == "spectrum":
        config = _load(args, "spectrum")
        result = harness.run_spectrum(config)
        out = _write(harness.spectrum_csv(result), args, config)
        if args.figures:
            from . import report

            report.spectrum_figure(result, _figure_path(out, "spectrum.png"))
        if math.isfinite(result.ks_distance):
            print(f"ks_distance_to_semicircle = {result.ks_distance!r}", file=sys.stderr)
        return EXIT_OK

    raise ConfigError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
