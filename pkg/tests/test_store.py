from __future__ import annotations

import json

import pytest

from dtstore import LocalStore, MemoryStore, Table
from dtstore.errors import AlreadyExists, DtError, SchemaViolation, UnknownColumn


def coo_row(tensor_id, indices, value):
    return {
        "id": tensor_id,
        "layout": "COO",
        "dense_shape": [3, 3, 3],
        "indices": indices,
        "value": value,
    }


@pytest.fixture(params=["memory", "local"])
def store(request, tmp_path):
    if request.param == "memory":
        return MemoryStore()
    return LocalStore(tmp_path / "objects")


class TestObjectStore:
    def test_put_get_list_delete(self, store):
        store.put("a/one", b"1")
        store.put("a/two", b"2")
        store.put("b/three", b"3")
        assert store.get("a/one") == b"1"
        assert store.list("a/") == ["a/one", "a/two"]
        store.delete("a/one")
        assert store.list("a/") == ["a/two"]
        with pytest.raises(KeyError):
            store.get("a/one")

    def test_put_overwrites_atomically(self, store):
        store.put("k", b"old")
        store.put("k", b"new")
        assert store.get("k") == b"new"


class TestTable:
    def test_create_then_scan_empty(self, store):
        table = Table.create(store, "t", "coo.v1")
        rows, stats = table.scan("nothing")
        assert rows == [] and stats.rows_scanned == 0

    def test_create_twice_fails(self, store):
        Table.create(store, "t", "coo.v1")
        with pytest.raises(AlreadyExists):
            Table.create(store, "t", "coo.v1")

    def test_open_matches_create(self, store):
        created = Table.create(store, "t", "coo.v1")
        reopened = Table.open(store, "t")
        assert reopened._manifest == created._manifest
        assert store.get("t/manifest.json") == created._manifest_bytes()

    def test_open_missing(self, store):
        with pytest.raises(DtError):
            Table.open(store, "absent")

    def test_append_and_scan(self, store):
        table = Table.create(store, "t", "coo.v1")
        table.append_rows([coo_row("A", [0, 0, i], float(i + 1)) for i in range(4)])
        rows, stats = table.scan("A")
        assert len(rows) == 4
        assert stats.rows_scanned == 4
        assert stats.segments_opened == 1

    def test_append_schema_violation(self, store):
        table = Table.create(store, "t", "coo.v1")
        with pytest.raises(SchemaViolation):
            table.append_rows([{"id": "A", "layout": "COO"}])
        with pytest.raises(SchemaViolation):
            table.append_rows([])

    def test_two_appends_union(self, store):
        table = Table.create(store, "t", "coo.v1")
        table.append_rows([coo_row("A", [0, 0, 0], 1.0)])
        table.append_rows([coo_row("A", [0, 0, 1], 2.0)])
        rows, stats = table.scan("A")
        assert sorted(r["value"] for r in rows) == [1.0, 2.0]
        assert stats.segments_opened == 2

    def test_scan_prunes_by_id(self, store):
        table = Table.create(store, "t", "coo.v1")
        table.append_rows([coo_row("A", [0, 0, i], float(i + 1)) for i in range(4)])
        table.append_rows([coo_row("B", [1, 0, i], float(i + 1)) for i in range(2)])
        rows, stats = table.scan("A")
        assert len(rows) == 4
        assert stats.segments_opened == 1  # B's segment never opened

    def test_scan_filtered(self, store):
        table = Table.create(store, "t", "coo.v1")
        table.append_rows([coo_row("A", [i, 0, 0], float(i + 1)) for i in range(3)])
        rows, stats = table.scan_filtered("A", lambda r: r["indices"][0] == 0)
        assert len(rows) == 1
        assert stats.rows_scanned == 3  # every row of the id was evaluated

        rows, stats = table.scan_filtered("A", lambda r: True)
        assert len(rows) == 3

        rows, stats = table.scan_filtered("A", lambda r: False)
        assert rows == [] and stats.rows_scanned == 3

    def test_unknown_column_in_predicate(self, store):
        table = Table.create(store, "t", "coo.v1")
        table.append_rows([coo_row("A", [0, 0, 0], 1.0)])
        with pytest.raises(UnknownColumn):
            table.scan_filtered("A", lambda r: r["no_such_column"] == 1)

    def test_size_grows_and_counts_manifest(self, store):
        table = Table.create(store, "t", "coo.v1")
        empty_size = table.size_bytes()
        assert empty_size == len(store.get("t/manifest.json"))
        table.append_rows([coo_row("A", [0, 0, 0], 1.0)])
        assert table.size_bytes() > empty_size

    def test_durability(self, tmp_path):
        root = tmp_path / "tbl"
        store = LocalStore(root)
        table = Table.create(store, "t", "coo.v1")
        table.append_rows([coo_row("A", [0, 0, i], float(i + 1)) for i in range(3)])
        table.set_tensor_meta("A", layout="COO", dense_shape=[3, 3, 3])

        reopened = Table.open(LocalStore(root), "t")
        rows, _ = reopened.scan("A")
        assert [r["value"] for r in rows] == [1.0, 2.0, 3.0]
        assert reopened.tensor_meta("A")["dense_shape"] == [3, 3, 3]
        assert reopened.size_bytes() == table.size_bytes()

    def test_manifest_is_inspectable_json(self, store):
        table = Table.create(store, "t", "csr.v1")
        doc = json.loads(store.get("t/manifest.json"))
        assert doc["schema"] == "csr.v1"
        assert doc["segments"] == []

    def test_determinism_across_builds(self, tmp_path):
        def build(where):
            store = LocalStore(where)
            table = Table.create(store, "t", "coo.v1")
            table.append_rows(
                [coo_row("A", [i % 3, 0, i % 2], float(i + 1)) for i in range(6)]
            )
            table.set_tensor_meta("A", layout="COO", dense_shape=[3, 3, 3])
            return {k: store.get(k) for k in store.list()}, table.size_bytes()

        one, size_one = build(tmp_path / "one")
        two, size_two = build(tmp_path / "two")
        assert one == two
        assert size_one == size_two
