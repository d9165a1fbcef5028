"""Coordinate rows and compressed sparse row/column encodings.

COO stores one table row per nonzero.  CSR/CSC first flatten the tensor
to a 2-D matrix (major dimension = the first tensor dimension, minor =
the row-major product of the rest), then compress the major dimension
into a pointer array.  The pointer array stays in a single header row;
minor indices and values are chunked for persistence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InconsistentMeta,
    InconsistentShape,
    MalformedPointers,
    MissingChunk,
)
from .store import ScanStats, Table
from .tensor import CooTensor, Dims, check_tensor_id

COO_LAYOUT = "COO"
COO_SCHEMA = "coo.v1"
HEADER_SEQ = -1
DEFAULT_CHUNK_LEN = 65_536


# --- COO rows ---

def coo_encode_rows(c: CooTensor, tensor_id: str) -> list[dict]:
    """One row per nonzero, in sorted coordinate order."""
    check_tensor_id(tensor_id)
    shape = list(c.dense_shape)
    return [
        {
            "id": tensor_id,
            "layout": COO_LAYOUT,
            "dense_shape": shape,
            "indices": c.indices[k].tolist(),
            "value": float(c.values[k]),
        }
        for k in range(c.nnz)
    ]


def coo_decode_rows(rows: list[dict]) -> CooTensor:
    """Rebuild the tensor; rows may arrive in any order."""
    if not rows:
        raise ValueError(
            "cannot decode zero COO rows; the shape lives in the table manifest"
        )
    tensor_id = rows[0]["id"]
    shape = tuple(rows[0]["dense_shape"])
    for row in rows:
        if row["id"] != tensor_id:
            raise InconsistentMeta("rows mix tensor ids")
        if tuple(row["dense_shape"]) != shape:
            raise InconsistentShape(
                f"rows disagree on dense_shape: {shape} vs {tuple(row['dense_shape'])}"
            )
    indices = np.asarray([row["indices"] for row in rows], dtype=np.int64)
    values = np.asarray([row["value"] for row in rows], dtype=np.float64)
    return CooTensor(shape, indices.reshape(len(rows), len(shape)), values)


def coo_write(table: Table, c: CooTensor, tensor_id: str) -> None:
    rows = coo_encode_rows(c, tensor_id)
    if rows:
        table.append_rows(rows)
    # An all-zero tensor writes no rows; its shape must still be recoverable.
    table.set_tensor_meta(
        tensor_id, layout=COO_LAYOUT, dense_shape=list(c.dense_shape)
    )


def coo_read(table: Table, tensor_id: str) -> tuple[CooTensor, ScanStats]:
    meta = table.tensor_meta(tensor_id)
    rows, stats = table.scan(tensor_id)
    if not rows:
        shape = tuple(meta["dense_shape"])
        empty = np.empty((0, len(shape)), dtype=np.int64)
        return CooTensor(shape, empty, np.empty(0)), stats
    return coo_decode_rows(rows), stats


# --- flattening ---

def flatten_to_matrix(c: CooTensor) -> CooTensor:
    """Reshape to 2-D: rows = d1, cols = product of the remaining dims.

    The result's ``dense_shape`` is the flattened shape; the index map is
    a bijection, so unflattening restores every coordinate exactly.
    """
    if c.rank == 1:
        flat_idx = np.column_stack(
            [c.indices[:, 0], np.zeros(c.nnz, dtype=np.int64)]
        )
        return CooTensor((c.dense_shape[0], 1), flat_idx, c.values)
    if c.rank == 2:
        return c
    cols = math.prod(c.dense_shape[1:])
    if c.nnz:
        minor = np.ravel_multi_index(tuple(c.indices[:, 1:].T), c.dense_shape[1:])
    else:
        minor = np.empty(0, dtype=np.int64)
    flat_idx = np.column_stack([c.indices[:, 0], minor])
    return CooTensor((c.dense_shape[0], cols), flat_idx, c.values)


def _unflatten_indices(flat_indices: np.ndarray, dense_shape: Dims) -> np.ndarray:
    if len(dense_shape) == 1:
        return flat_indices[:, :1]
    if len(dense_shape) == 2:
        return flat_indices
    if not len(flat_indices):
        return np.empty((0, len(dense_shape)), dtype=np.int64)
    rest = np.unravel_index(flat_indices[:, 1], dense_shape[1:])
    return np.column_stack([flat_indices[:, 0], *rest]).astype(np.int64)


# --- CSR / CSC ---

@dataclass(eq=False)
class CsrEncoded:
    """Pointer/minor/values triple over the flattened matrix."""

    id: str
    layout: str  # "CSR" or "CSC"
    dense_shape: Dims
    flattened_shape: Dims
    pointer_array: np.ndarray
    minor_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.dense_shape = tuple(int(d) for d in self.dense_shape)
        self.flattened_shape = tuple(int(d) for d in self.flattened_shape)
        self.pointer_array = np.asarray(self.pointer_array, dtype=np.int64)
        self.minor_indices = np.asarray(self.minor_indices, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CsrEncoded):
            return NotImplemented
        return (
            self.id == other.id
            and self.layout == other.layout
            and self.dense_shape == other.dense_shape
            and self.flattened_shape == other.flattened_shape
            and np.array_equal(self.pointer_array, other.pointer_array)
            and np.array_equal(self.minor_indices, other.minor_indices)
            and self.values.tobytes() == other.values.tobytes()
        )


def csr_encode(c: CooTensor, orientation: str, tensor_id: str) -> CsrEncoded:
    """Flatten then compress the major dimension.

    ``orientation`` is ``"row"`` (CSR: pointers over matrix rows) or
    ``"col"`` (CSC: pointers over matrix columns).
    """
    check_tensor_id(tensor_id)
    if orientation not in ("row", "col"):
        raise ValueError(f"orientation must be 'row' or 'col', got {orientation!r}")
    flat = flatten_to_matrix(c)
    rows_dim, cols_dim = flat.dense_shape
    if orientation == "row":
        major, minor, major_dim = flat.indices[:, 0], flat.indices[:, 1], rows_dim
        order = np.arange(flat.nnz)  # already sorted by (row, col)
        layout = "CSR"
    else:
        major, minor = flat.indices[:, 1], flat.indices[:, 0]
        major_dim = cols_dim
        order = np.lexsort((minor, major))
        layout = "CSC"
    counts = np.bincount(major, minlength=major_dim) if flat.nnz else np.zeros(
        major_dim, dtype=np.int64
    )
    pointer = np.zeros(major_dim + 1, dtype=np.int64)
    np.cumsum(counts, out=pointer[1:])
    return CsrEncoded(
        id=tensor_id,
        layout=layout,
        dense_shape=c.dense_shape,
        flattened_shape=flat.dense_shape,
        pointer_array=pointer,
        minor_indices=minor[order],
        values=flat.values[order],
    )


def _check_pointers(pointer: np.ndarray, major_dim: int, nnz: int) -> None:
    if len(pointer) != major_dim + 1:
        raise MalformedPointers(
            f"pointer array has {len(pointer)} entries, expected {major_dim + 1}"
        )
    if len(pointer) and (pointer[0] != 0 or pointer[-1] != nnz):
        raise MalformedPointers(
            f"pointer array must start at 0 and end at nnz={nnz}"
        )
    if (np.diff(pointer) < 0).any():
        raise MalformedPointers("pointer array is not non-decreasing")


def csr_decode(e: CsrEncoded) -> CooTensor:
    """Invert the compression and the flattening."""
    rows_dim, cols_dim = e.flattened_shape
    major_dim = rows_dim if e.layout == "CSR" else cols_dim
    _check_pointers(e.pointer_array, major_dim, e.nnz)
    if rows_dim * cols_dim != math.prod(e.dense_shape):
        raise InconsistentShape(
            f"flattened shape {e.flattened_shape} does not cover {e.dense_shape}"
        )
    major = np.repeat(np.arange(major_dim, dtype=np.int64), np.diff(e.pointer_array))
    if e.layout == "CSR":
        flat_idx = np.column_stack([major, e.minor_indices])
    else:
        flat_idx = np.column_stack([e.minor_indices, major])
    nd_idx = _unflatten_indices(flat_idx, e.dense_shape)
    return CooTensor(e.dense_shape, nd_idx, e.values)


def csr_to_rows(e: CsrEncoded, chunk_len: int = DEFAULT_CHUNK_LEN) -> list[dict]:
    """Header row with the pointer array, then chunked minor/value slices."""
    if chunk_len < 1:
        raise ValueError("chunk_len must be >= 1")
    rows = [
        {
            "id": e.id,
            "layout": e.layout,
            "dense_shape": list(e.dense_shape),
            "flattened_shape": list(e.flattened_shape),
            "pointer_array": e.pointer_array.tolist(),
            "chunk_seq": HEADER_SEQ,
            "minor_indices": [],
            "values": [],
        }
    ]
    for seq, start in enumerate(range(0, e.nnz, chunk_len)):
        stop = min(start + chunk_len, e.nnz)
        rows.append(
            {
                "id": e.id,
                "layout": "",
                "dense_shape": [],
                "flattened_shape": [],
                "pointer_array": [],
                "chunk_seq": seq,
                "minor_indices": e.minor_indices[start:stop].tolist(),
                "values": e.values[start:stop].tolist(),
            }
        )
    return rows


def rows_to_csr(rows: list[dict]) -> CsrEncoded:
    headers = [row for row in rows if row["chunk_seq"] == HEADER_SEQ]
    if len(headers) != 1:
        raise InconsistentMeta(f"expected exactly one header row, got {len(headers)}")
    header = headers[0]
    chunks = sorted(
        (row for row in rows if row["chunk_seq"] != HEADER_SEQ),
        key=lambda row: row["chunk_seq"],
    )
    if [row["chunk_seq"] for row in chunks] != list(range(len(chunks))):
        raise MissingChunk("chunk sequence numbers are not contiguous from 0")
    minor = np.concatenate(
        [np.asarray(row["minor_indices"], dtype=np.int64) for row in chunks]
    ) if chunks else np.empty(0, dtype=np.int64)
    values = np.concatenate(
        [np.asarray(row["values"], dtype=np.float64) for row in chunks]
    ) if chunks else np.empty(0)
    return CsrEncoded(
        id=header["id"],
        layout=header["layout"],
        dense_shape=tuple(header["dense_shape"]),
        flattened_shape=tuple(header["flattened_shape"]),
        pointer_array=np.asarray(header["pointer_array"], dtype=np.int64),
        minor_indices=minor,
        values=values,
    )


def csr_write(
    table: Table, e: CsrEncoded, chunk_len: int = DEFAULT_CHUNK_LEN
) -> None:
    table.append_rows(csr_to_rows(e, chunk_len))
    table.set_tensor_meta(
        e.id,
        layout=e.layout,
        dense_shape=list(e.dense_shape),
        chunk_len=chunk_len,
    )


def csr_read(table: Table, tensor_id: str) -> tuple[CsrEncoded, ScanStats]:
    table.tensor_meta(tensor_id)
    rows, stats = table.scan(tensor_id)
    return rows_to_csr(rows), stats
