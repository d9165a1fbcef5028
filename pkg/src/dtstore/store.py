"""Tables over a key-value object store.

A table is a prefix holding one ``manifest.json`` plus immutable segment
files.  The manifest carries the schema name, the segment list with
sizes, an id -> segments index used to prune scans, and a per-tensor
metadata record (layout, dense shape, and layout-specific extras).
Appends rewrite the manifest atomically; segments are never modified, so
readers see a consistent snapshot and identical append sequences produce
byte-identical tables.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

from .errors import AlreadyExists, DtError, SchemaViolation, UnknownColumn, UnknownId
from .segment import read_segment, schema_columns, write_segment

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


def _check_key(key: str) -> str:
    if not key or key.startswith("/") or ".." in key.split("/"):
        raise ValueError(f"bad object key {key!r}")
    return key


class LocalStore:
    """Object store backed by a local directory; puts are write-then-rename."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def put(self, key: str, data: bytes) -> None:
        path = self.root / _check_key(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".put-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def get(self, key: str) -> bytes:
        path = self.root / _check_key(key)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            raise KeyError(key) from None

    def list(self, prefix: str = "") -> list[str]:
        keys = []
        for path in self.root.rglob("*"):
            if path.is_file() and not path.name.startswith(".put-"):
                key = path.relative_to(self.root).as_posix()
                if key.startswith(prefix):
                    keys.append(key)
        return sorted(keys)

    def delete(self, key: str) -> None:
        path = self.root / _check_key(key)
        try:
            path.unlink()
        except FileNotFoundError:
            raise KeyError(key) from None


class MemoryStore:
    """Dict-backed object store for tests and scratch work."""

    def __init__(self):
        self._objects: dict[str, bytes] = {}

    def put(self, key: str, data: bytes) -> None:
        self._objects[_check_key(key)] = bytes(data)

    def get(self, key: str) -> bytes:
        return self._objects[_check_key(key)]

    def list(self, prefix: str = "") -> list[str]:
        return sorted(k for k in self._objects if k.startswith(prefix))

    def delete(self, key: str) -> None:
        del self._objects[_check_key(key)]


@dataclass
class ScanStats:
    """Deterministic I/O accounting for one read operation."""

    rows_scanned: int = 0
    bytes_read: int = 0
    segments_opened: int = 0


class Table:
    """Append/scan handle for one schema under one store prefix."""

    def __init__(self, store, prefix: str, manifest: dict):
        self.store = store
        self.prefix = prefix.rstrip("/")
        self._manifest = manifest

    # --- lifecycle ---

    @classmethod
    def create(cls, store, prefix: str, schema_name: str) -> "Table":
        schema_columns(schema_name)  # validate the name early
        prefix = prefix.rstrip("/")
        if store.list(prefix + "/" if prefix else ""):
            raise AlreadyExists(f"store prefix {prefix!r} is not empty")
        manifest = {
            "manifest_version": MANIFEST_VERSION,
            "schema": schema_name,
            "segments": [],
            "id_index": {},
            "tensors": {},
        }
        table = cls(store, prefix, manifest)
        table._save_manifest()
        return table

    @classmethod
    def open(cls, store, prefix: str) -> "Table":
        prefix = prefix.rstrip("/")
        key = f"{prefix}/{MANIFEST_NAME}" if prefix else MANIFEST_NAME
        try:
            raw = store.get(key)
        except KeyError:
            raise DtError(f"no table at {prefix!r}") from None
        manifest = json.loads(raw.decode("utf-8"))
        if manifest.get("manifest_version") != MANIFEST_VERSION:
            raise DtError(
                f"unsupported manifest version {manifest.get('manifest_version')}"
            )
        return cls(store, prefix, manifest)

    @staticmethod
    def exists(store, prefix: str) -> bool:
        prefix = prefix.rstrip("/")
        key = f"{prefix}/{MANIFEST_NAME}" if prefix else MANIFEST_NAME
        try:
            store.get(key)
            return True
        except KeyError:
            return False

    # --- manifest helpers ---

    @property
    def schema_name(self) -> str:
        return self._manifest["schema"]

    def _key(self, name: str) -> str:
        return f"{self.prefix}/{name}" if self.prefix else name

    def _manifest_bytes(self) -> bytes:
        return (
            json.dumps(self._manifest, sort_keys=True, separators=(",", ":")) + "\n"
        ).encode("utf-8")

    def _save_manifest(self) -> None:
        self.store.put(self._key(MANIFEST_NAME), self._manifest_bytes())

    # --- writes ---

    def append_rows(self, rows) -> str:
        """Write one immutable segment and index it; returns the segment key."""
        if not rows:
            raise SchemaViolation("append_rows requires at least one row")
        data = write_segment(self.schema_name, rows)
        name = f"seg-{len(self._manifest['segments']):06d}.dtbl"
        self.store.put(self._key(name), data)
        ids = sorted({str(row["id"]) for row in rows})
        self._manifest["segments"].append(
            {"key": name, "bytes": len(data), "rows": len(rows), "ids": ids}
        )
        index = self._manifest["id_index"]
        for tensor_id in ids:
            index.setdefault(tensor_id, []).append(name)
        self._save_manifest()
        return name

    def set_tensor_meta(self, tensor_id: str, **fields) -> None:
        """Record layout/shape metadata for one tensor id in the manifest."""
        meta = self._manifest["tensors"].setdefault(tensor_id, {})
        meta.update(fields)
        self._save_manifest()

    # --- reads ---

    def tensor_meta(self, tensor_id: str) -> dict:
        try:
            return self._manifest["tensors"][tensor_id]
        except KeyError:
            raise UnknownId(f"unknown id {tensor_id!r}") from None

    def has_tensor(self, tensor_id: str) -> bool:
        return tensor_id in self._manifest["tensors"]

    def tensor_ids(self) -> list[str]:
        return sorted(self._manifest["tensors"])

    def _segments_for(self, tensor_id: str) -> list[str]:
        return self._manifest["id_index"].get(tensor_id, [])

    def scan(self, tensor_id: str) -> tuple[list[dict], ScanStats]:
        """All rows of one id, touching only segments the index lists."""
        return self._scan(tensor_id, lambda row: True)

    def scan_filtered(
        self, tensor_id: str, predicate: Callable[[Mapping], bool]
    ) -> tuple[list[dict], ScanStats]:
        """Rows of one id that satisfy ``predicate``; every row of the id is
        evaluated and counted in ``rows_scanned``."""
        return self._scan(tensor_id, predicate)

    def _scan(self, tensor_id, predicate):
        stats = ScanStats()
        matched = []
        for name in self._segments_for(tensor_id):
            data = self.store.get(self._key(name))
            stats.segments_opened += 1
            stats.bytes_read += len(data)
            _, rows = read_segment(data)
            for row in rows:
                if row["id"] != tensor_id:
                    continue
                stats.rows_scanned += 1
                try:
                    keep = predicate(row)
                except KeyError as exc:
                    raise UnknownColumn(f"predicate read unknown column {exc}") from None
                if keep:
                    matched.append(row)
        return matched, stats

    def size_bytes(self) -> int:
        """Manifest plus all segment files, as currently persisted."""
        return len(self._manifest_bytes()) + sum(
            seg["bytes"] for seg in self._manifest["segments"]
        )


def create_table(store, prefix: str, schema_name: str) -> Table:
    return Table.create(store, prefix, schema_name)


def open_table(store, prefix: str) -> Table:
    return Table.open(store, prefix)
