"""Command line front end.

Four subcommands:

  run      simulate a session, write report.json / counts.csv / report.png
  budget   print the analytic error budget for a parameter set
  lock     simulate the stabilisation loop, write trace.csv / lock.png
  sweep    rerun a scenario along one parameter axis, write sweep.csv / sweep.png

Exit codes: 0 on success, 2 for configuration or parameter problems,
3 for simulation failures and anything unexpected.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .analysis import error_budget, report_from_result, sweep
from .config import load_config
from .errors import ConfigError, ParameterError, SimulationError
from .feedback import PhaseState, run_lock
from .figures import lock_figure, run_figure, sweep_figure
from .protocol import run_experiment, write_trials_csv


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config",
        default="desktop_mu05",
        help="config file path or bundled config name (default: desktop_mu05)",
    )
    parser.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config entry, dotted keys for nesting "
        "(e.g. detector.efficiency=0.1); repeatable",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfqkd",
        description="Monte Carlo simulator for counterfactual key distribution",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a key distribution session")
    _add_config_args(p_run)
    p_run.add_argument("--seed", type=int, default=None, help="override config seed")
    p_run.add_argument("--slots", type=int, default=None, help="override slot count")
    p_run.add_argument("--workers", type=int, default=None, help="process count")
    p_run.add_argument(
        "--feedback",
        choices=("on", "off"),
        default=None,
        help="force the stabilisation loop on or off (live mode only)",
    )
    p_run.add_argument(
        "--trials",
        action="store_true",
        help="also write per-slot records to trials.csv (memory heavy)",
    )
    p_run.add_argument("--out", default="out", help="output directory (default: out)")
    p_run.set_defaults(func=cmd_run)

    p_budget = sub.add_parser("budget", help="print the analytic error budget")
    _add_config_args(p_budget)
    p_budget.add_argument(
        "--d1-rate",
        type=float,
        default=70.0,
        help="observed key detector rate in clicks/s (default: 70)",
    )
    p_budget.set_defaults(func=cmd_budget)

    p_lock = sub.add_parser("lock", help="simulate the phase stabilisation loop")
    _add_config_args(p_lock)
    p_lock.add_argument("--seed", type=int, default=None, help="override config seed")
    p_lock.add_argument(
        "--duration", type=float, default=1.0, help="simulated seconds (default: 1)"
    )
    p_lock.add_argument(
        "--feedback", choices=("on", "off"), default="on", help="loop on or off"
    )
    p_lock.add_argument("--out", default="out", help="output directory (default: out)")
    p_lock.set_defaults(func=cmd_lock)

    p_sweep = sub.add_parser("sweep", help="rerun a scenario along one parameter axis")
    _add_config_args(p_sweep)
    p_sweep.add_argument("--seed", type=int, default=None, help="override config seed")
    p_sweep.add_argument(
        "--slots", type=int, default=None, help="slots per point (default: config)"
    )
    p_sweep.add_argument(
        "--axis",
        required=True,
        help="parameter to vary: visibility, efficiency, dark, afterpulse, "
        "or a dotted attribute path like splitter.reflectivity",
    )
    p_sweep.add_argument(
        "--values",
        required=True,
        help="comma separated axis values, e.g. 0.90,0.95,0.98",
    )
    p_sweep.add_argument("--out", default="out", help="output directory (default: out)")
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def _outdir(args) -> Path:
    path = Path(args.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_counts_csv(report, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["section", "key", "value"])
        writer.writerow(["summary", "n_slots", report.n_slots])
        writer.writerow(["summary", "session_seconds", report.session_seconds])
        writer.writerow(["summary", "sifted_bits", report.sifted_bits])
        writer.writerow(["summary", "sifted_errors", report.sifted_errors])
        writer.writerow(["summary", "qber", report.qber])
        writer.writerow(["summary", "key_rate_bits_per_s", report.key_rate_bits_per_s])
        for name, count in report.classification_counts.items():
            writer.writerow(["classification", name, count])
        for name, count in report.total_counts.items():
            writer.writerow(["channel", name, count])
        writer.writerow(["monitor", "d2_counts_same", report.d2_counts_same])
        writer.writerow(["monitor", "d2_counts_diff", report.d2_counts_diff])
        writer.writerow(["monitor", "d3_counts_same", report.d3_counts_same])
        writer.writerow(["monitor", "d3_counts_diff", report.d3_counts_diff])
        writer.writerow(["monitor", "d3_error_rate", report.d3_error_rate])


def _fmt_rate(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.override)
    n_slots = args.slots if args.slots is not None else cfg.n_slots
    seed = args.seed if args.seed is not None else cfg.seed
    workers = args.workers if args.workers is not None else cfg.workers
    feedback = cfg.feedback
    if args.feedback is not None:
        feedback = replace(feedback, enabled=(args.feedback == "on"))

    result = run_experiment(
        cfg.params,
        n_slots,
        seed=seed,
        feedback=feedback,
        adversary=cfg.adversary,
        block_size=cfg.block_size,
        workers=workers,
        record_trials=args.trials,
    )
    report = report_from_result(result)

    out = _outdir(args)
    (out / "report.json").write_text(report.to_json() + "\n")
    _write_counts_csv(report, out / "counts.csv")
    run_figure(report, out / "report.png")
    if args.trials:
        write_trials_csv(result.records, out / "trials.csv")

    print(f"slots:       {report.n_slots}")
    print(f"sifted bits: {report.sifted_bits}")
    print(f"key rate:    {report.key_rate_bits_per_s:.2f} bits/s")
    print(f"qber:        {_fmt_rate(report.qber)}")
    if report.budget is not None:
        print(f"e_total:     {report.budget.e_total:.4f}")
    print(f"wrote {out / 'report.json'}, {out / 'counts.csv'}, {out / 'report.png'}")
    return 0


def cmd_budget(args) -> int:
    cfg = load_config(args.config, args.override)
    budget = error_budget(cfg.params, args.d1_rate)
    print(f"error budget at D1 rate {args.d1_rate:g} clicks/s")
    for name, value in budget.as_dict().items():
        print(f"  {name:14s} {value:.6f}  ({100 * value:.3f}%)")
    return 0


def cmd_lock(args) -> int:
    cfg = load_config(args.config, args.override)
    seed = args.seed if args.seed is not None else cfg.seed
    phase = PhaseState.at_lock_point(
        drift_rad_per_ms=cfg.feedback.drift_rad_per_ms
    )
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    trace = run_lock(
        phase,
        cfg.feedback.controller,
        duration_s=args.duration,
        rng=rng,
        feedback_on=(args.feedback == "on"),
        noise_sd=cfg.feedback.noise_sd,
    )

    out = _outdir(args)
    trace.to_csv(out / "trace.csv")
    lock_figure(trace, out / "lock.png")

    for name, value in trace.summary().items():
        if isinstance(value, float):
            print(f"{name:24s} {value:.6f}")
        else:
            print(f"{name:24s} {value}")
    print(f"wrote {out / 'trace.csv'}, {out / 'lock.png'}")
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.override)
    seed = args.seed if args.seed is not None else cfg.seed
    n_slots = args.slots if args.slots is not None else cfg.n_slots
    try:
        values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    except ValueError:
        raise ParameterError(f"cannot parse --values {args.values!r}") from None

    result = sweep(
        cfg.params,
        args.axis,
        values,
        n_slots,
        seed=seed,
        feedback=cfg.feedback,
        adversary=cfg.adversary,
        block_size=cfg.block_size,
        workers=cfg.workers,
    )

    out = _outdir(args)
    result.to_csv(out / "sweep.csv")
    sweep_figure(result, out / "sweep.png")

    print(f"{args.axis:>12s}  {'sifted':>8s}  {'qber':>8s}  {'e_total':>8s}")
    for row in result.rows():
        qber = _fmt_rate(row["qber"])
        e_total = _fmt_rate(row["e_total"])
        print(f"{row[args.axis]:12.6g}  {row['sifted_bits']:8d}  {qber:>8s}  {e_total:>8s}")
    print(f"wrote {out / 'sweep.csv'}, {out / 'sweep.png'}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001
        print(f"unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
