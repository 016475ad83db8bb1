"""Plotting for the scheduling solver's CSV/JSON artifacts.

This package is a pure reader of the documented artifact schemas: CSVs with
``#``-prefixed metadata headers and JSON documents carrying
``schema_version`` / ``kind`` / ``config_hash`` / ``config``. It never
imports from or writes into the solver package.
"""

from wncs_analysis.artifacts_io import ArtifactMeta, SchemaError, read_csv_artifact, read_json_artifact
from wncs_analysis.plots import (
    PlotSpec,
    plot_cost_bars,
    plot_residual_curve,
    plot_threshold_surface,
    plot_value_heatmap,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactMeta",
    "SchemaError",
    "read_csv_artifact",
    "read_json_artifact",
    "PlotSpec",
    "plot_cost_bars",
    "plot_residual_curve",
    "plot_threshold_surface",
    "plot_value_heatmap",
]
