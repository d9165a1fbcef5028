from __future__ import annotations

import pytest

from dtstore.errors import BadMagic, CorruptColumn, SchemaViolation, UnsupportedVersion
from dtstore.segment import read_segment, segment_info, write_segment


def coo_row(tensor_id, indices, value):
    return {
        "id": tensor_id,
        "layout": "COO",
        "dense_shape": [3, 3, 3],
        "indices": indices,
        "value": value,
    }


def test_roundtrip_plain_and_dict():
    rows = [coo_row("t1", [i, 0, i % 3], float(i + 1)) for i in range(10)]
    data = write_segment("coo.v1", rows)
    schema, back = read_segment(data)
    assert schema == "coo.v1"
    assert back == rows


def test_single_row_stays_plain():
    rows = [coo_row("t1", [0, 0, 0], 1.0)]
    info = segment_info(write_segment("coo.v1", rows))
    # A one-entry dictionary cannot shrink a one-row column.
    assert all(col["encoding"] == "plain" for col in info["columns"].values())


def test_repeated_metadata_dictionary_encodes():
    rows = []
    for k in range(24):
        rows.append(
            {
                "id": "img",
                "chunk_index": k + 1,
                "chunk": bytes([k]) * 40,
                "dim_count": 4,
                "dimensions": [24, 3, 8, 8],
                "chunk_dim_count": 3,
                "dtype": 0,
            }
        )
    info = segment_info(write_segment("ftsf.v1", rows))
    for column in ("id", "dim_count", "dimensions", "chunk_dim_count", "dtype"):
        entry = info["columns"][column]
        assert entry["encoding"] == "dict"
        assert entry["dict_size"] == 1
        assert entry["run_count"] == 1
    assert info["columns"]["chunk_index"]["encoding"] == "plain"


def test_dict_skipped_beyond_cap():
    rows = [coo_row("t1", [0, 0, 0], float(i)) for i in range(1, 400)]
    info = segment_info(write_segment("coo.v1", rows))
    assert info["columns"]["value"]["encoding"] == "plain"


def test_schema_violations():
    good = coo_row("t1", [0, 0, 0], 1.0)
    missing = {k: v for k, v in good.items() if k != "value"}
    with pytest.raises(SchemaViolation):
        write_segment("coo.v1", [missing])
    extra = dict(good, bogus=1)
    with pytest.raises(SchemaViolation):
        write_segment("coo.v1", [extra])
    bad_type = dict(good, value="not a float")
    with pytest.raises(SchemaViolation):
        write_segment("coo.v1", [bad_type])
    with pytest.raises(SchemaViolation):
        write_segment("nope.v9", [good])


def test_corrupt_column_detected():
    data = bytearray(write_segment("coo.v1", [coo_row("t1", [0, 1, 2], 5.0)]))
    data[-3] ^= 0xFF  # flip a bit inside the last column payload
    with pytest.raises(CorruptColumn):
        read_segment(bytes(data))


def test_bad_magic_and_version():
    data = bytearray(write_segment("coo.v1", [coo_row("t1", [0, 0, 0], 1.0)]))
    with pytest.raises(BadMagic):
        read_segment(b"ZZZZ" + bytes(data[4:]))
    data[4] = 9
    with pytest.raises(UnsupportedVersion):
        read_segment(bytes(data))


def test_determinism():
    rows = [coo_row("t1", [i % 3, i % 2, 0], float(i + 1)) for i in range(50)]
    assert write_segment("coo.v1", rows) == write_segment("coo.v1", list(rows))


def test_float_bit_patterns_survive():
    rows = [coo_row("t1", [i, 0, 0], v) for i, v in enumerate([1e-308, -2.5, 3.25])]
    _, back = read_segment(write_segment("coo.v1", rows))
    assert [r["value"] for r in back] == [1e-308, -2.5, 3.25]
