#!/usr/bin/env python3
"""Threshold-surface sweeps over the model parameters.

Re-solves the folded problem for each value of the chosen axis and stacks the
extracted threshold surfaces x*(tau, b) into one long-format CSV
(``sweep_thresholds.csv``), ready for the small-multiples threshold plot.
"""

import argparse
import sys

from wncs.cli import main as wncs

DEFAULT_VALUES = {
    "p": "0.0,0.2,0.5",
    "beta": "0.8,0.9,0.95",
    "B": "1,2,3,4",
    "a": "0.5,0.8,0.95",
    "sigma2": "0.5,1.0,2.0",
}


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--axis", default="p", choices=sorted(DEFAULT_VALUES))
    parser.add_argument("--values", help="comma-separated override of the sweep values")
    parser.add_argument("--out", default=None, help="default: results/sweep_<axis>")
    args = parser.parse_args(argv)

    out = args.out or f"results/sweep_{args.axis}"
    values = args.values or DEFAULT_VALUES[args.axis]
    step = ["sweep", "--out", out, "--axis", args.axis, "--values", values]
    print(f"$ wncs {' '.join(step)}", flush=True)
    code = wncs(step)
    if code == 0:
        print(f"sweep written to {out}/sweep_thresholds.csv")
    return code


if __name__ == "__main__":
    sys.exit(run())
