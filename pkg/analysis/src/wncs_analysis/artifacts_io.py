"""Readers for the solver's artifact formats.

CSV artifacts carry ``#``-prefixed metadata lines (``schema_version``,
``kind``, ``config_hash``, ``config``) before the column header; JSON
artifacts carry the same fields at the top level. Both are validated here so
every figure can state which configuration produced its data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

SUPPORTED_SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """Artifact is missing, malformed, or lacks required columns/fields."""


@dataclass(frozen=True)
class ArtifactMeta:
    schema_version: int
    kind: str
    config_hash: str
    config: dict

    @property
    def short_hash(self) -> str:
        return self.config_hash[:12]


def _parse_header(path: Path) -> ArtifactMeta:
    fields: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            key, _, value = body.partition("=")
            fields[key] = value
    missing = {"schema_version", "kind", "config_hash", "config"} - set(fields)
    if missing:
        raise SchemaError(f"{path}: metadata header missing {sorted(missing)}")
    try:
        version = int(fields["schema_version"])
        config = json.loads(fields["config"])
    except (ValueError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: malformed metadata header: {exc}") from exc
    if version != SUPPORTED_SCHEMA_VERSION:
        raise SchemaError(
            f"{path}: schema_version {version}, supported {SUPPORTED_SCHEMA_VERSION}"
        )
    return ArtifactMeta(
        schema_version=version,
        kind=fields["kind"],
        config_hash=fields["config_hash"],
        config=config,
    )


def read_csv_artifact(
    path,
    expected_kind: str | None = None,
    required_columns: tuple[str, ...] = (),
) -> tuple[ArtifactMeta, pd.DataFrame]:
    """Read a metadata-headed CSV; validate kind and required columns."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"artifact not found: {path}")
    meta = _parse_header(path)
    if expected_kind is not None and meta.kind != expected_kind:
        raise SchemaError(f"{path}: kind {meta.kind!r}, expected {expected_kind!r}")
    frame = pd.read_csv(path, comment="#")
    missing = set(required_columns) - set(frame.columns)
    if missing:
        raise SchemaError(
            f"{path}: missing columns {sorted(missing)}; found {list(frame.columns)}"
        )
    return meta, frame


def read_json_artifact(path, expected_kind: str | None = None) -> tuple[ArtifactMeta, dict]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"artifact not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    for field in ("schema_version", "kind", "config_hash", "config"):
        if field not in doc:
            raise SchemaError(f"{path}: missing field {field!r}")
    if doc["schema_version"] != SUPPORTED_SCHEMA_VERSION:
        raise SchemaError(
            f"{path}: schema_version {doc['schema_version']}, "
            f"supported {SUPPORTED_SCHEMA_VERSION}"
        )
    if expected_kind is not None and doc["kind"] != expected_kind:
        raise SchemaError(f"{path}: kind {doc['kind']!r}, expected {expected_kind!r}")
    meta = ArtifactMeta(
        schema_version=doc["schema_version"],
        kind=doc["kind"],
        config_hash=doc["config_hash"],
        config=doc["config"],
    )
    return meta, doc
