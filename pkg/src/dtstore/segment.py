"""Columnar segment files: the byte-exact unit of table persistence.

Layout, all integers little-endian::

    magic "DTBL" | version u16 | schema-name len u16 + utf8 | column count u16
    | row count u64
    then per column:
    name len u16 + utf8 | type tag u8 | encoding u8 | payload len u64
    | crc32 u32 | payload

Type tags: 0=text, 1=i64, 2=f64, 3=bytes, 4=i64 list, 5=f64 list.
Plain payloads pack i64/f64 values back to back; text/bytes prefix each
value with a u32 length; lists prefix each value with a u32 element count.
Dictionary/RLE payloads hold a u32 dictionary size, the dictionary entries
in plain form, a u32 run count, then (u32 dict index, u32 run length)
pairs.  A column is dictionary-encoded iff it has at most 255 distinct
values and that actually shrinks the payload, so identical inputs always
produce identical bytes.
"""
from __future__ import annotations

import struct
import zlib
from enum import IntEnum
from typing import Mapping, Sequence

import numpy as np

from .errors import BadMagic, CorruptColumn, SchemaViolation, UnsupportedVersion

SEGMENT_MAGIC = b"DTBL"
SEGMENT_VERSION = 1
DICT_MAX_DISTINCT = 255

ENCODING_PLAIN = 0
ENCODING_DICT = 1

_HEAD = struct.Struct("<4sH")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_I64 = struct.Struct("<q")
_F64 = struct.Struct("<d")
_COL_TAIL = struct.Struct("<BBQI")  # type, encoding, payload len, crc


class ColumnType(IntEnum):
    TEXT = 0
    I64 = 1
    F64 = 2
    BYTES = 3
    I64_LIST = 4
    F64_LIST = 5


# One row schema per layout.  Header and chunk rows of the chunked layouts
# share a union schema; chunk_seq == -1 marks the header row and the
# columns a row kind does not use are left empty.  The dictionary encoder
# makes those fillers nearly free.
SCHEMAS: dict[str, tuple[tuple[str, ColumnType], ...]] = {
    "ftsf.v1": (
        ("id", ColumnType.TEXT),
        ("chunk_index", ColumnType.I64),
        ("chunk", ColumnType.BYTES),
        ("dim_count", ColumnType.I64),
        ("dimensions", ColumnType.I64_LIST),
        ("chunk_dim_count", ColumnType.I64),
        ("dtype", ColumnType.I64),
    ),
    "coo.v1": (
        ("id", ColumnType.TEXT),
        ("layout", ColumnType.TEXT),
        ("dense_shape", ColumnType.I64_LIST),
        ("indices", ColumnType.I64_LIST),
        ("value", ColumnType.F64),
    ),
    "csr.v1": (
        ("id", ColumnType.TEXT),
        ("layout", ColumnType.TEXT),
        ("dense_shape", ColumnType.I64_LIST),
        ("flattened_shape", ColumnType.I64_LIST),
        ("pointer_array", ColumnType.I64_LIST),
        ("chunk_seq", ColumnType.I64),
        ("minor_indices", ColumnType.I64_LIST),
        ("values", ColumnType.F64_LIST),
    ),
    "csf.v1": (
        ("id", ColumnType.TEXT),
        ("layout", ColumnType.TEXT),
        ("dense_shape", ColumnType.I64_LIST),
        ("fptr_zero", ColumnType.I64_LIST),
        ("fid_zero", ColumnType.I64_LIST),
        ("fptr_one", ColumnType.I64_LIST),
        ("fid_one", ColumnType.I64_LIST),
        ("array_kind", ColumnType.TEXT),
        ("chunk_seq", ColumnType.I64),
        ("i64_payload", ColumnType.I64_LIST),
        ("f64_payload", ColumnType.F64_LIST),
    ),
    "bsgs.v1": (
        ("id", ColumnType.TEXT),
        ("dense_shape", ColumnType.I64_LIST),
        ("block_shape", ColumnType.I64_LIST),
        ("indices", ColumnType.I64_LIST),
        ("values", ColumnType.F64_LIST),
    ),
}
SCHEMAS["csc.v1"] = SCHEMAS["csr.v1"]


def schema_columns(schema_name: str) -> tuple[tuple[str, ColumnType], ...]:
    try:
        return SCHEMAS[schema_name]
    except KeyError:
        raise SchemaViolation(f"unknown schema {schema_name!r}") from None


def _normalize(ctype: ColumnType, value, column: str):
    try:
        if ctype is ColumnType.I64:
            if isinstance(value, bool):
                raise TypeError
            return int(value)
        if ctype is ColumnType.F64:
            return float(value)
        if ctype is ColumnType.TEXT:
            if not isinstance(value, str):
                raise TypeError
            return value
        if ctype is ColumnType.BYTES:
            if isinstance(value, (bytes, bytearray, memoryview)):
                return bytes(value)
            raise TypeError
        if ctype is ColumnType.I64_LIST:
            if isinstance(value, np.ndarray):
                value = value.tolist()
            return [int(v) for v in value]
        if ctype is ColumnType.F64_LIST:
            if isinstance(value, np.ndarray):
                value = value.tolist()
            return [float(v) for v in value]
    except (TypeError, ValueError):
        pass
    raise SchemaViolation(f"column {column!r} got incompatible value {value!r}")


def _encode_value(ctype: ColumnType, value) -> bytes:
    if ctype is ColumnType.I64:
        return _I64.pack(value)
    if ctype is ColumnType.F64:
        return _F64.pack(value)
    if ctype is ColumnType.TEXT:
        raw = value.encode("utf-8")
        return _U32.pack(len(raw)) + raw
    if ctype is ColumnType.BYTES:
        return _U32.pack(len(value)) + value
    if ctype is ColumnType.I64_LIST:
        return struct.pack(f"<I{len(value)}q", len(value), *value)
    return struct.pack(f"<I{len(value)}d", len(value), *value)


def _decode_value(ctype: ColumnType, buf: bytes, offset: int):
    if ctype is ColumnType.I64:
        return _I64.unpack_from(buf, offset)[0], offset + 8
    if ctype is ColumnType.F64:
        return _F64.unpack_from(buf, offset)[0], offset + 8
    (n,) = _U32.unpack_from(buf, offset)
    offset += 4
    if ctype is ColumnType.TEXT:
        return buf[offset : offset + n].decode("utf-8"), offset + n
    if ctype is ColumnType.BYTES:
        return bytes(buf[offset : offset + n]), offset + n
    if ctype is ColumnType.I64_LIST:
        return list(struct.unpack_from(f"<{n}q", buf, offset)), offset + 8 * n
    return list(struct.unpack_from(f"<{n}d", buf, offset)), offset + 8 * n


def _dict_payload(encoded: list[bytes]) -> bytes | None:
    """Dictionary/RLE form of a column, or None if over the distinct cap."""
    entries: dict[bytes, int] = {}
    codes = []
    for raw in encoded:
        code = entries.get(raw)
        if code is None:
            if len(entries) >= DICT_MAX_DISTINCT:
                return None
            code = len(entries)
            entries[raw] = code
        codes.append(code)
    runs = []
    prev, count = codes[0], 0
    for code in codes:
        if code == prev:
            count += 1
        else:
            runs.append((prev, count))
            prev, count = code, 1
    runs.append((prev, count))
    parts = [_U32.pack(len(entries))]
    parts.extend(entries)
    parts.append(_U32.pack(len(runs)))
    parts.extend(struct.pack("<II", code, length) for code, length in runs)
    return b"".join(parts)


def write_segment(schema_name: str, rows: Sequence[Mapping[str, object]]) -> bytes:
    """Serialize uniform rows; identical input always yields identical bytes."""
    if not rows:
        raise ValueError("a segment needs at least one row")
    columns = schema_columns(schema_name)
    names = {name for name, _ in columns}
    for i, row in enumerate(rows):
        extra = set(row) - names
        missing = names - set(row)
        if extra or missing:
            raise SchemaViolation(
                f"row {i} does not match schema {schema_name}: "
                f"missing={sorted(missing)} extra={sorted(extra)}"
            )

    name_raw = schema_name.encode("utf-8")
    parts = [
        _HEAD.pack(SEGMENT_MAGIC, SEGMENT_VERSION),
        _U16.pack(len(name_raw)),
        name_raw,
        _U16.pack(len(columns)),
        _U64.pack(len(rows)),
    ]
    for col_name, ctype in columns:
        encoded = [
            _encode_value(ctype, _normalize(ctype, row[col_name], col_name))
            for row in rows
        ]
        plain = b"".join(encoded)
        payload, encoding = plain, ENCODING_PLAIN
        dict_payload = _dict_payload(encoded)
        if dict_payload is not None and len(dict_payload) < len(plain):
            payload, encoding = dict_payload, ENCODING_DICT
        col_raw = col_name.encode("utf-8")
        parts.append(_U16.pack(len(col_raw)))
        parts.append(col_raw)
        parts.append(
            _COL_TAIL.pack(int(ctype), encoding, len(payload), zlib.crc32(payload))
        )
        parts.append(payload)
    return b"".join(parts)


def _decode_column(ctype: ColumnType, encoding: int, payload: bytes, row_count: int):
    if encoding == ENCODING_PLAIN:
        values, offset = [], 0
        for _ in range(row_count):
            value, offset = _decode_value(ctype, payload, offset)
            values.append(value)
        return values
    (dict_size,) = _U32.unpack_from(payload, 0)
    offset = 4
    entries = []
    for _ in range(dict_size):
        value, offset = _decode_value(ctype, payload, offset)
        entries.append(value)
    (run_count,) = _U32.unpack_from(payload, offset)
    offset += 4
    values = []
    for _ in range(run_count):
        code, length = struct.unpack_from("<II", payload, offset)
        offset += 8
        if code >= dict_size:
            raise CorruptColumn(f"dictionary index {code} out of range")
        values.extend([entries[code]] * length)
    if len(values) != row_count:
        raise CorruptColumn(
            f"runs expand to {len(values)} values for {row_count} rows"
        )
    return values


def read_segment(data: bytes) -> tuple[str, list[dict]]:
    """Inverse of :func:`write_segment`; verifies every column CRC."""
    if data[:4] != SEGMENT_MAGIC:
        raise BadMagic(f"expected DTBL magic, got {data[:4]!r}")
    _, version = _HEAD.unpack_from(data)
    if version != SEGMENT_VERSION:
        raise UnsupportedVersion(f"segment version {version}")
    offset = _HEAD.size
    (name_len,) = _U16.unpack_from(data, offset)
    offset += 2
    schema_name = data[offset : offset + name_len].decode("utf-8")
    offset += name_len
    (col_count,) = _U16.unpack_from(data, offset)
    offset += 2
    (row_count,) = _U64.unpack_from(data, offset)
    offset += 8

    columns: dict[str, list] = {}
    for _ in range(col_count):
        (n,) = _U16.unpack_from(data, offset)
        offset += 2
        col_name = data[offset : offset + n].decode("utf-8")
        offset += n
        type_tag, encoding, payload_len, crc = _COL_TAIL.unpack_from(data, offset)
        offset += _COL_TAIL.size
        payload = data[offset : offset + payload_len]
        offset += payload_len
        if zlib.crc32(payload) != crc:
            raise CorruptColumn(f"checksum mismatch in column {col_name!r}")
        try:
            columns[col_name] = _decode_column(
                ColumnType(type_tag), encoding, payload, row_count
            )
        except (struct.error, IndexError, ValueError) as exc:
            raise CorruptColumn(f"column {col_name!r}: {exc}") from exc

    rows = [
        {name: values[i] for name, values in columns.items()}
        for i in range(row_count)
    ]
    return schema_name, rows


def segment_info(data: bytes) -> dict:
    """Per-column encoding details, for inspection and tests."""
    if data[:4] != SEGMENT_MAGIC:
        raise BadMagic(f"expected DTBL magic, got {data[:4]!r}")
    offset = _HEAD.size
    (name_len,) = _U16.unpack_from(data, offset)
    offset += 2
    schema_name = data[offset : offset + name_len].decode("utf-8")
    offset += name_len
    (col_count,) = _U16.unpack_from(data, offset)
    offset += 2
    (row_count,) = _U64.unpack_from(data, offset)
    offset += 8
    info = {"schema": schema_name, "rows": row_count, "columns": {}}
    for _ in range(col_count):
        (n,) = _U16.unpack_from(data, offset)
        offset += 2
        col_name = data[offset : offset + n].decode("utf-8")
        offset += n
        type_tag, encoding, payload_len, _ = _COL_TAIL.unpack_from(data, offset)
        offset += _COL_TAIL.size
        entry = {
            "type": ColumnType(type_tag).name,
            "encoding": "dict" if encoding == ENCODING_DICT else "plain",
            "payload_bytes": payload_len,
        }
        if encoding == ENCODING_DICT:
            (dict_size,) = _U32.unpack_from(data, offset)
            pos = offset + 4
            for _ in range(dict_size):
                _, pos = _decode_value(ColumnType(type_tag), data, pos)
            (run_count,) = _U32.unpack_from(data, pos)
            entry["dict_size"] = dict_size
            entry["run_count"] = run_count
        info["columns"][col_name] = entry
        offset += payload_len
    return info
