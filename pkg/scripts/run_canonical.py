#!/usr/bin/env python3
"""End-to-end run on the canonical instance.

Solves the folded and symmetric problems, verifies the structural properties,
extracts the threshold policy, and benchmarks it by Monte Carlo against the
baseline policies. All artifacts land in the output directory (default
``results/canonical``) and are the inputs the plotting package consumes.
"""

import argparse
import sys

from wncs.cli import main as wncs


def run(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="results/canonical")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-rollouts", type=int, default=20_000)
    args = parser.parse_args(argv)

    steps = [
        ["solve", "--out", args.out, "--symmetric", "--tol", "1e-8"],
        [
            "verify", "--out", args.out, "--tol", "1e-8",
            "--table", f"{args.out}/value_table.json",
            "--symmetric-table", f"{args.out}/value_table_symmetric.json",
        ],
        [
            "simulate", "--out", args.out, "--tol", "1e-8",
            "--policy", f"{args.out}/thresholds.json",
            "--baselines", "never_act,periodic(2),greedy_uplink,random_admissible",
            "--seed", str(args.seed), "--n-rollouts", str(args.n_rollouts),
        ],
    ]
    for step in steps:
        print(f"$ wncs {' '.join(step)}", flush=True)
        code = wncs(step)
        if code != 0:
            print(f"step failed with exit code {code}", file=sys.stderr)
            return code
    print(f"artifacts written to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
