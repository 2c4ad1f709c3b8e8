"""Persistent run manifest: line-delimited JSON with atomic commits.

One header record, one record per source (sorted by path), then corpus-
level balance/pack records. Serialization is canonical (sorted keys,
fixed separators) so identical runs produce byte-identical files; every
commit writes a temp file and renames it over the manifest, which makes a
kill at any point leave either the previous or the new snapshot, never a
torn file.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CorruptManifest

SCHEMA_VERSION = 1

# per-source processing stages, in pipeline order
SOURCE_STAGES = ("ingest", "prefilter", "clip")


@dataclass
class SourceRecord:
    source_path: str
    content_hash: str = ""
    kind: str = "video"  # "video" | "image"
    error: str | None = None
    meta: dict | None = None
    prefilter: dict | None = None
    clips: list = field(default_factory=list)
    pre_tags: list = field(default_factory=list)
    stages: dict = field(default_factory=dict)

    def stage_done(self, stage: str) -> bool:
        return self.stages.get(stage) == "done"

    def to_dict(self) -> dict:
        return {
            "record": "source",
            "source_path": self.source_path,
            "content_hash": self.content_hash,
            "kind": self.kind,
            "error": self.error,
            "meta": self.meta,
            "prefilter": self.prefilter,
            "clips": self.clips,
            "pre_tags": self.pre_tags,
            "stages": self.stages,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SourceRecord":
        return cls(
            source_path=d["source_path"],
            content_hash=d.get("content_hash", ""),
            kind=d.get("kind", "video"),
            error=d.get("error"),
            meta=d.get("meta"),
            prefilter=d.get("prefilter"),
            clips=d.get("clips", []),
            pre_tags=d.get("pre_tags", []),
            stages=d.get("stages", {}),
        )


@dataclass
class Manifest:
    config_hash: str
    seed: int
    sources: dict[str, SourceRecord] = field(default_factory=dict)
    balance: dict | None = None
    pack: dict | None = None

    def ordered_sources(self) -> list[SourceRecord]:
        return [self.sources[k] for k in sorted(self.sources)]

    def records(self) -> list[dict]:
        out: list[dict] = [
            {
                "record": "header",
                "schema_version": SCHEMA_VERSION,
                "config_hash": self.config_hash,
                "seed": self.seed,
            }
        ]
        out.extend(r.to_dict() for r in self.ordered_sources())
        if self.balance is not None:
            out.append({"record": "balance", **self.balance})
        if self.pack is not None:
            out.append({"record": "pack", **self.pack})
        return out


def dumps_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    """Atomic-rename commit of the full manifest snapshot."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".manifest-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            for record in manifest.records():
                fh.write(dumps_record(record) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise CorruptManifest(f"manifest not found: {path}")
    header = None
    sources: dict[str, SourceRecord] = {}
    balance = None
    pack = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptManifest(f"{path}:{lineno}: not JSON: {exc}") from exc
            kind = record.get("record")
            if kind == "header":
                header = record
            elif kind == "source":
                rec = SourceRecord.from_dict(record)
                sources[rec.source_path] = rec
            elif kind == "balance":
                record.pop("record")
                balance = record
            elif kind == "pack":
                record.pop("record")
                pack = record
            else:
                raise CorruptManifest(f"{path}:{lineno}: unknown record {kind!r}")
    if header is None:
        raise CorruptManifest(f"{path}: missing header record")
    if header.get("schema_version") != SCHEMA_VERSION:
        raise CorruptManifest(
            f"{path}: schema_version {header.get('schema_version')} != {SCHEMA_VERSION}"
        )
    return Manifest(
        config_hash=header.get("config_hash", ""),
        seed=header.get("seed", 0),
        sources=sources,
        balance=balance,
        pack=pack,
    )
