"""Golden-schema tests: the three CSV artifact kinds (value table,
thresholds, simulation results) parse with their documented columns and
metadata, and malformed inputs are rejected with clear errors."""

import numpy as np
import pytest

from wncs_analysis.artifacts_io import (
    SchemaError,
    read_csv_artifact,
    read_json_artifact,
)

EXPECTED_COLUMNS = {
    "value_table.csv": (
        "x", "tau", "y", "b", "V", "Q_idle", "Q_uplink", "Q_downlink", "action",
    ),
    "thresholds.csv": ("tau", "b", "x_star", "refined_x_star"),
    "results.csv": ("policy", "mean", "se", "n_rollouts", "horizon", "seed"),
}


class TestGoldenSchemas:
    @pytest.mark.parametrize("name", sorted(EXPECTED_COLUMNS))
    def test_columns_and_metadata(self, artifacts_dir, name):
        meta, frame = read_csv_artifact(
            artifacts_dir / name, required_columns=EXPECTED_COLUMNS[name]
        )
        assert meta.schema_version == 1
        assert meta.kind == name.rsplit(".", 1)[0]
        assert len(meta.config_hash) == 64
        assert meta.config["grid"]["n_nodes"] == 41
        assert not frame.empty

    def test_value_table_shape_and_types(self, artifacts_dir):
        _, frame = read_csv_artifact(artifacts_dir / "value_table.csv")
        # folded grid: 21 nodes x 7 ages x 2 flags x 4 battery levels
        assert len(frame) == 21 * 7 * 2 * 4
        assert frame["V"].dtype == np.float64
        assert (frame["V"] >= 0).all()
        assert set(frame["y"].unique()) == {0, 1}
        assert set(frame["action"].unique()) <= {0, 1, 2}

    def test_thresholds_parse_infinities(self, artifacts_dir):
        _, frame = read_csv_artifact(artifacts_dir / "thresholds.csv")
        assert len(frame) == 7 * 4
        xs = frame["x_star"].to_numpy(dtype=float)
        assert np.isfinite(xs).any() or np.isinf(xs).all()

    def test_results_rows_per_policy(self, artifacts_dir):
        _, frame = read_csv_artifact(artifacts_dir / "results.csv")
        assert list(frame["policy"]) == [
            "optimal", "never_act", "greedy_uplink", "random_admissible",
        ]
        assert (frame["se"] >= 0).all()

    def test_sweep_artifact(self, artifacts_dir):
        meta, frame = read_csv_artifact(
            artifacts_dir / "sweep_thresholds.csv",
            expected_kind="sweep_thresholds",
            required_columns=("axis", "value", "tau", "b", "x_star"),
        )
        assert sorted(frame["value"].unique()) == [0.0, 0.2, 0.5]

    def test_json_artifact_fields(self, artifacts_dir):
        meta, doc = read_json_artifact(
            artifacts_dir / "solve_report.json", expected_kind="solve_report"
        )
        assert doc["converged"] is True
        assert meta.config_hash == doc["config_hash"]


class TestRejection:
    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError, match="not found"):
            read_csv_artifact(tmp_path / "nope.csv")

    def test_missing_metadata_header(self, tmp_path):
        path = tmp_path / "bare.csv"
        path.write_text("tau,b,x_star\n0,0,1.0\n")
        with pytest.raises(SchemaError, match="metadata header"):
            read_csv_artifact(path)

    def test_wrong_kind(self, artifacts_dir):
        with pytest.raises(SchemaError, match="kind"):
            read_csv_artifact(artifacts_dir / "thresholds.csv", expected_kind="results")

    def test_missing_columns(self, artifacts_dir):
        with pytest.raises(SchemaError, match="missing columns"):
            read_csv_artifact(
                artifacts_dir / "thresholds.csv", required_columns=("nonexistent",)
            )

    def test_unsupported_schema_version(self, tmp_path, artifacts_dir):
        src = (artifacts_dir / "thresholds.csv").read_text()
        bad = tmp_path / "thresholds.csv"
        bad.write_text(src.replace("# schema_version=1", "# schema_version=99"))
        with pytest.raises(SchemaError, match="schema_version"):
            read_csv_artifact(bad)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(SchemaError, match="JSON"):
            read_json_artifact(path)
