"""Artifact serialization shared by the CLI and tests.

Every artifact embeds the full resolved configuration, a schema version, and
the configuration's SHA-256 hash; JSON artifacts additionally carry a
``created_at`` timestamp on its own line so byte comparisons can exclude it.
CSV artifacts carry the same metadata as ``#``-prefixed header lines and
contain no timestamps at all.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone

SCHEMA_VERSION = 1


def config_hash(config_dict: dict) -> str:
    canonical = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def csv_header_lines(kind: str, config_dict: dict) -> list[str]:
    return [
        f"schema_version={SCHEMA_VERSION}",
        f"kind={kind}",
        f"config_hash={config_hash(config_dict)}",
        "config=" + json.dumps(config_dict, sort_keys=True, separators=(",", ":")),
    ]


def write_json_artifact(path, kind: str, payload: dict, config_dict: dict) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config_hash": config_hash(config_dict),
        "config": config_dict,
        **payload,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=False)
        fh.write("\n")


def read_json_artifact(path, expected_kind: str | None = None) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(
            f"{path}: schema_version {doc.get('schema_version')!r}, expected {SCHEMA_VERSION}"
        )
    if expected_kind is not None and doc.get("kind") != expected_kind:
        raise ValueError(f"{path}: kind {doc.get('kind')!r}, expected {expected_kind!r}")
    return doc
