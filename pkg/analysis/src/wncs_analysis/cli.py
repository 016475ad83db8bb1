"""One console script per figure kind. Each takes artifact path(s) and an
output image path, prints the written file on success, and exits non-zero
with a message on schema or input errors."""

from __future__ import annotations

import argparse
import sys

from wncs_analysis.artifacts_io import SchemaError
from wncs_analysis.plots import (
    plot_cost_bars,
    plot_residual_curve,
    plot_threshold_surface,
    plot_value_heatmap,
)


def _run(fn, *args, **kwargs) -> int:
    try:
        out = fn(*args, **kwargs)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


def threshold_surface_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Plot the threshold surface x*(tau, b) from a thresholds "
        "or sweep artifact; infinite thresholds render as gaps."
    )
    parser.add_argument("thresholds", help="thresholds.csv or sweep_thresholds.csv")
    parser.add_argument("output", help="image path (.png/.svg/.pdf)")
    parser.add_argument(
        "--refined", action="store_true",
        help="plot the sub-grid interpolated thresholds instead of grid-node ones",
    )
    args = parser.parse_args(argv)
    return _run(plot_threshold_surface, args.thresholds, args.output, refined=args.refined)


def value_heatmap_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Heatmap of the value function over (x, tau) at a fixed "
        "(y, b) slice, with an optional threshold overlay."
    )
    parser.add_argument("value_table", help="value_table.csv artifact")
    parser.add_argument("output", help="image path (.png/.svg/.pdf)")
    parser.add_argument("--y", type=int, default=1, choices=(0, 1))
    parser.add_argument("--b", type=int, default=3)
    parser.add_argument("--thresholds", help="thresholds.csv for the overlay")
    args = parser.parse_args(argv)
    return _run(
        plot_value_heatmap, args.value_table, args.output,
        y=args.y, b=args.b, thresholds_path=args.thresholds,
    )


def cost_bars_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Bar chart of Monte Carlo policy costs with ±2·SE whiskers."
    )
    parser.add_argument("results", help="results.csv artifact")
    parser.add_argument("output", help="image path (.png/.svg/.pdf)")
    args = parser.parse_args(argv)
    return _run(plot_cost_bars, args.results, args.output)


def residual_curve_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Log-scale plot of value-iteration residuals per iteration."
    )
    parser.add_argument("report", help="solve_report.json artifact")
    parser.add_argument("output", help="image path (.png/.svg/.pdf)")
    args = parser.parse_args(argv)
    return _run(plot_residual_curve, args.report, args.output)


if __name__ == "__main__":
    sys.exit(threshold_surface_main())
