"""Figure builders over the solver's artifacts.

All figures embed the source artifact's configuration hash twice: as a small
caption in the lower-left corner and in the image file's metadata, so any
rendered file can be traced back to the exact run that produced it. Styling
is pinned for reproducible output; rendering the same inputs twice yields
identical image bytes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from wncs_analysis.artifacts_io import (
    ArtifactMeta,
    SchemaError,
    read_csv_artifact,
    read_json_artifact,
)

STYLE = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "wncs-analysis",
    "lines.linewidth": 1.6,
}

SUPPORTED_FORMATS = (".png", ".svg", ".pdf")

KINDS = ("threshold_surface", "value_heatmap", "cost_bars", "residual_curve")


def _save(fig, out_path, meta: ArtifactMeta) -> Path:
    out = Path(out_path)
    if out.suffix not in SUPPORTED_FORMATS:
        raise SchemaError(
            f"unsupported output format {out.suffix!r}; use one of {SUPPORTED_FORMATS}"
        )
    fig.text(0.005, 0.005, f"config {meta.short_hash}", fontsize=6, alpha=0.75)
    if out.suffix == ".pdf":
        metadata = {"Subject": f"config_hash={meta.config_hash}", "CreationDate": None}
    else:
        metadata = {"Description": f"config_hash={meta.config_hash}"}
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata=metadata)
    plt.close(fig)
    return out


def plot_threshold_surface(thresholds_path, out_path, refined: bool = False) -> Path:
    """Threshold surface x*(tau, b): one line per battery level.

    Accepts a single-run ``thresholds`` artifact or a ``sweep_thresholds``
    artifact (rendered as a small-multiples grid, one panel per swept value).
    Infinite thresholds (downlink never chosen) appear as gaps.
    """
    column = "refined_x_star" if refined else "x_star"
    meta, frame = read_csv_artifact(
        thresholds_path, required_columns=("tau", "b", column)
    )
    if meta.kind not in ("thresholds", "sweep_thresholds"):
        raise SchemaError(
            f"{thresholds_path}: kind {meta.kind!r}, expected 'thresholds' "
            "or 'sweep_thresholds'"
        )
    if meta.kind == "sweep_thresholds":
        if "axis" not in frame.columns or "value" not in frame.columns:
            raise SchemaError(f"{thresholds_path}: sweep artifact lacks axis/value columns")
        groups = list(frame.groupby("value", sort=True))
        axis_name = str(frame["axis"].iloc[0])
    else:
        groups = [(None, frame)]
        axis_name = None

    with plt.rc_context(STYLE):
        n = len(groups)
        fig, axes = plt.subplots(
            1, n, figsize=(4.2 * n, 3.4), sharey=True, squeeze=False
        )
        for ax, (value, sub) in zip(axes[0], groups):
            any_inf = False
            any_finite = False
            for b, per_b in sub.groupby("b", sort=True):
                per_b = per_b.sort_values("tau")
                xs = per_b[column].to_numpy(dtype=float)
                any_inf = any_inf or bool(np.isinf(xs).any())
                any_finite = any_finite or bool(np.isfinite(xs).any())
                xs = np.where(np.isinf(xs), np.nan, xs)
                ax.plot(per_b["tau"], xs, marker="o", markersize=3, label=f"b={b}")
            ax.set_xlabel("age of controller data (tau)")
            title = "control threshold x*(tau, b)"
            if value is not None:
                title += f"  [{axis_name}={value:g}]"
            ax.set_title(title)
            if not any_finite:
                ax.annotate(
                    "all thresholds are +inf:\ndownlink never chosen",
                    xy=(0.5, 0.5), xycoords="axes fraction", ha="center", va="center",
                )
            legend_title = "+inf shown as gaps" if any_inf else None
            ax.legend(title=legend_title, fontsize=7)
        axes[0][0].set_ylabel("threshold on |x|")
        fig.tight_layout(rect=(0, 0.02, 1, 1))
        return _save(fig, out_path, meta)


def plot_value_heatmap(
    value_path, out_path, y: int = 1, b: int = 3, thresholds_path=None
) -> Path:
    """Heatmap of the value function over (x, tau) at a fixed (y, b) slice,
    with the threshold curve overlaid when a thresholds artifact is given
    and the slice has a downlink region (y = 1)."""
    meta, frame = read_csv_artifact(
        value_path, required_columns=("x", "tau", "y", "b", "V")
    )
    if not meta.kind.startswith("value_table"):
        raise SchemaError(f"{value_path}: kind {meta.kind!r}, expected a value table")
    piece = frame[(frame["y"] == y) & (frame["b"] == b)]
    if piece.empty:
        raise SchemaError(f"{value_path}: slice (y={y}, b={b}) absent")
    pivot = piece.pivot_table(index="tau", columns="x", values="V")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.4, 3.6))
        mesh = ax.pcolormesh(
            pivot.columns.to_numpy(),
            pivot.index.to_numpy(),
            pivot.to_numpy(),
            shading="nearest",
        )
        fig.colorbar(mesh, ax=ax, label="value")
        if thresholds_path is not None and y == 1:
            _, thr = read_csv_artifact(
                thresholds_path, expected_kind=None, required_columns=("tau", "b", "x_star")
            )
            line = thr[thr["b"] == b].sort_values("tau")
            xs = line["x_star"].to_numpy(dtype=float)
            xs = np.where(np.isinf(xs), np.nan, xs)
            ax.plot(xs, line["tau"], color="white", label="threshold x*")
            ax.legend(loc="upper right", fontsize=7)
        ax.set_xlabel("plant state x")
        ax.set_ylabel("age tau")
        ax.set_title(f"value function, y={y}, b={b}")
        fig.tight_layout(rect=(0, 0.02, 1, 1))
        return _save(fig, out_path, meta)


def plot_cost_bars(results_path, out_path) -> Path:
    """Policy comparison: bars of Monte Carlo mean discounted cost, sorted
    ascending, with ±2·SE whiskers when a standard-error column is present."""
    meta, frame = read_csv_artifact(
        results_path, expected_kind="results", required_columns=("policy", "mean")
    )
    if len(frame) < 2:
        warnings.warn("fewer than 2 policies in the results artifact", stacklevel=2)
    ordered = frame.sort_values("mean", kind="stable")
    has_se = "se" in ordered.columns
    if not has_se:
        warnings.warn("no 'se' column: rendering bars without whiskers", stacklevel=2)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.8, 3.4))
        yerr = 2.0 * ordered["se"].to_numpy(dtype=float) if has_se else None
        ax.bar(
            ordered["policy"], ordered["mean"].to_numpy(dtype=float),
            yerr=yerr, capsize=4, color="tab:blue", alpha=0.85,
        )
        ax.set_ylabel("discounted cost (Monte Carlo mean)")
        label = "policies sorted by mean"
        if has_se:
            label += "; whiskers = ±2·SE"
        ax.set_title(label)
        ax.tick_params(axis="x", rotation=20)
        fig.tight_layout(rect=(0, 0.02, 1, 1))
        return _save(fig, out_path, meta)


def plot_residual_curve(report_path, out_path) -> Path:
    """Solver convergence: sup-norm residual per iteration on a log scale,
    with the convergence tolerance marked."""
    meta, doc = read_json_artifact(report_path, expected_kind="solve_report")
    history = doc.get("residual_history")
    if not history:
        raise SchemaError(f"{report_path}: empty residual_history")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.8, 3.4))
        ax.semilogy(range(1, len(history) + 1), history)
        tol = doc.get("tol")
        if tol:
            ax.axhline(tol, color="tab:red", linestyle="--", label=f"tol = {tol:g}")
            ax.legend(fontsize=7)
        ax.set_xlabel("iteration")
        ax.set_ylabel("sup-norm residual")
        converged = "converged" if doc.get("converged") else "not converged"
        ax.set_title(f"value iteration residuals ({converged})")
        fig.tight_layout(rect=(0, 0.02, 1, 1))
        return _save(fig, out_path, meta)


_RENDERERS = {
    "threshold_surface": lambda spec: plot_threshold_surface(
        spec.inputs[0], spec.output, **spec.options
    ),
    "value_heatmap": lambda spec: plot_value_heatmap(
        spec.inputs[0], spec.output,
        thresholds_path=spec.inputs[1] if len(spec.inputs) > 1 else None,
        **spec.options,
    ),
    "cost_bars": lambda spec: plot_cost_bars(spec.inputs[0], spec.output),
    "residual_curve": lambda spec: plot_residual_curve(spec.inputs[0], spec.output),
}


@dataclass(frozen=True)
class PlotSpec:
    """One figure request: input artifact paths, output image path, figure
    kind, and kind-specific styling options."""

    inputs: tuple[str, ...]
    output: str
    kind: str
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; valid: {KINDS}")
        if not self.inputs:
            raise SchemaError("at least one input artifact path is required")
        if Path(self.output).suffix not in SUPPORTED_FORMATS:
            raise SchemaError(
                f"unsupported output format {Path(self.output).suffix!r}; "
                f"use one of {SUPPORTED_FORMATS}"
            )
        missing = [p for p in self.inputs if not Path(p).exists()]
        if missing:
            raise SchemaError(f"input artifacts not found: {missing}")

    def render(self) -> Path:
        return _RENDERERS[self.kind](self)
