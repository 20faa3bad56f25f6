"""``simulate`` command line entry point.

Exit codes: 0 full success, 1 configuration error, 2 partial run failures
(rows flagged in the status column).
"""

from __future__ import annotations

import argparse
import sys

from . import harness, phaseopt as po
from .channel import ConfigError, load_config

REPORTS = ("theorem1", "cdf", "energy", "convergence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="IRS-assisted mmWave multicast MIMO link-level simulator")
    parser.add_argument("--config", help="scenario JSON (defaults to the desk-scale preset)")
    parser.add_argument("--sweep", choices=[s for s in harness.SWEEP_CHOICES if s != "none"],
                        help="sweep variable")
    parser.add_argument("--sweep-values",
                        help="comma-separated sweep values (defaults per sweep kind)")
    parser.add_argument("--baselines", default="proposed",
                        help="comma-separated subset of proposed,a,b,c,d,e")
    parser.add_argument("--seeds", type=int, default=1, metavar="N",
                        help="number of Monte Carlo seeds")
    parser.add_argument("--base-seed", type=int, default=0)
    parser.add_argument("--out", help="output CSV path (default: stdout)")
    parser.add_argument("--trace", help="per-iteration phase-optimizer trace CSV")
    parser.add_argument("--report", choices=REPORTS,
                        help="emit a named report instead of a sweep")
    parser.add_argument("--static-power-dbm", type=float, default=39.0)
    parser.add_argument("--element-power-dbm", type=float, default=10.0)
    parser.add_argument("--workers", type=int, default=1,
                        help="thread pool size for independent runs")
    parser.add_argument("--timing", action="store_true",
                        help="record wall-clock ms per run (breaks byte determinism)")
    return parser


def _parse_values(text: str | None) -> tuple[float, ...]:
    if not text:
        return ()
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"bad sweep values {text!r}") from None


def _run_report(args, cfg) -> int:
    if args.report == "theorem1":
        harness.theorem1_report(cfg, seeds=max(args.seeds, 1), out_path=args.out)
    elif args.report == "cdf":
        baselines = tuple(args.baselines.split(","))
        harness.cdf_report(cfg, seeds=args.seeds, baselines=baselines,
                           out_path=args.out, base_seed=args.base_seed)
    elif args.report == "energy":
        values = _parse_values(args.sweep_values) or harness.DEFAULT_SWEEP_VALUES["power"]
        baselines = tuple(args.baselines.split(","))
        harness.energy_report(cfg, values, seeds=args.seeds, baselines=baselines,
                              out_path=args.out,
                              static_power_dbm=args.static_power_dbm,
                              element_power_dbm=args.element_power_dbm,
                              base_seed=args.base_seed)
    elif args.report == "convergence":
        harness.convergence_report(cfg, seeds=args.seeds, out_path=args.out,
                                   base_seed=args.base_seed)
    if args.out is None:
        print(f"report {args.report} computed (use --out to persist)", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else harness.DESK_CONFIG
        if args.report:
            return _run_report(args, cfg)
        spec = harness.ExperimentSpec(
            config=cfg,
            sweep_var=args.sweep or "none",
            sweep_values=_parse_values(args.sweep_values),
            baselines=tuple(args.baselines.split(",")),
            n_seeds=args.seeds,
            base_seed=args.base_seed,
            static_power_dbm=args.static_power_dbm,
            element_power_dbm=args.element_power_dbm,
            measure_walltime=args.timing,
            n_workers=args.workers)
        records = harness.sweep(spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.out:
        harness.write_records_csv(args.out, records)
    else:
        sys.stdout.write(harness.records_csv_text(records))
    if args.trace:
        traced = next((r for r in records if r.trace), None)
        if traced is not None:
            po.write_trace(args.trace, traced.trace)
    return 2 if any(not r.ok for r in records) else 0


if __name__ == "__main__":
    sys.exit(main())
