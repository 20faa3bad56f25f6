#!/usr/bin/env python3
"""Diagnostic reports: truncated-SVD fidelity, rate CDF, energy efficiency,
optimizer convergence.

Each report lands in its own CSV under the output directory.
"""

import argparse
import pathlib

from irs_multicast import harness


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="results", type=pathlib.Path)
    parser.add_argument("--seeds", default=50, type=int)
    args = parser.parse_args()

    cfg = harness.DESK_CONFIG
    args.outdir.mkdir(parents=True, exist_ok=True)

    harness.theorem1_report(cfg, seeds=min(args.seeds, 24),
                            out_path=args.outdir / "sigma_approx_fidelity.csv")
    print(f"{args.outdir / 'sigma_approx_fidelity.csv'}: written")

    harness.cdf_report(cfg, seeds=args.seeds, baselines=("proposed", "a", "b", "c"),
                       out_path=args.outdir / "sum_rate_cdf.csv")
    print(f"{args.outdir / 'sum_rate_cdf.csv'}: written")

    harness.energy_report(cfg, (20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0),
                          seeds=min(args.seeds, 20), baselines=("proposed", "b", "d"),
                          out_path=args.outdir / "energy_efficiency.csv")
    print(f"{args.outdir / 'energy_efficiency.csv'}: written")

    harness.convergence_report(cfg, seeds=min(args.seeds, 10),
                               out_path=args.outdir / "convergence.csv")
    print(f"{args.outdir / 'convergence.csv'}: written")


if __name__ == "__main__":
    main()
