#!/usr/bin/env python3
"""Sum-rate sweeps over transmit power, IRS elements, streams, and groups.

Writes one CSV per sweep into the output directory (Monte Carlo over seeds,
all baselines). Plotting is left to your tool of choice; columns follow the
harness schema.
"""

import argparse
import pathlib

from irs_multicast import harness


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="results", type=pathlib.Path)
    parser.add_argument("--seeds", default=20, type=int)
    parser.add_argument("--baselines", default="proposed,a,b,c,d,e")
    parser.add_argument("--config", help="scenario JSON (default: desk preset)")
    args = parser.parse_args()

    cfg = harness.DESK_CONFIG
    if args.config:
        from irs_multicast.channel import load_config
        cfg = load_config(args.config)
    args.outdir.mkdir(parents=True, exist_ok=True)
    baselines = tuple(args.baselines.split(","))

    for sweep_var in ("power", "elements", "streams", "groups"):
        spec = harness.ExperimentSpec(config=cfg, sweep_var=sweep_var,
                                      baselines=baselines, n_seeds=args.seeds)
        records = harness.sweep(spec)
        out = args.outdir / f"sum_rate_vs_{sweep_var}.csv"
        harness.write_records_csv(out, records)
        n_failed = sum(1 for r in records if not r.ok)
        print(f"{out}: {len(records)} rows ({n_failed} failed)")


if __name__ == "__main__":
    main()
