"""Flattened tensor storage for general (dense) tensors.

A rank-N tensor is split along its leading ``N - chunk_dim`` dimensions
into an array of rank-``chunk_dim`` chunks, one table row per chunk.
Chunks are numbered 1..K in row-major order of their leading coordinates,
which makes chunk number <-> leading coordinate pure arithmetic and lets
a leading-dimension slice fetch exactly the rows it needs.
"""
from __future__ import annotations

import math

import numpy as np

from .containers import dense_from_bytes, dense_to_bytes
from .errors import (
    BadChunkDim,
    InconsistentMeta,
    MergedDimSliced,
    MissingChunk,
    ShapeMismatch,
)
from .store import ScanStats, Table
from .tensor import DenseTensor, ElementType, SliceSpec, check_tensor_id

LAYOUT_NAME = "FTSF"
SCHEMA = "ftsf.v1"


def _split_shape(shape, chunk_dim: int):
    rank = len(shape)
    if not 1 <= chunk_dim < rank:
        raise BadChunkDim(
            f"chunk_dim must be in [1, {rank - 1}] for a rank-{rank} tensor, "
            f"got {chunk_dim}"
        )
    return shape[: rank - chunk_dim], shape[rank - chunk_dim :]


def ftsf_encode(t: DenseTensor, chunk_dim: int, tensor_id: str) -> list[dict]:
    """One row per chunk; concatenating chunks in order reproduces ``t``."""
    check_tensor_id(tensor_id)
    lead_dims, chunk_shape = _split_shape(t.shape, chunk_dim)
    lead_count = math.prod(lead_dims)
    chunks = t.data.reshape((lead_count,) + chunk_shape)
    rows = []
    for k in range(lead_count):
        payload = dense_to_bytes(DenseTensor(chunk_shape, t.dtype, chunks[k]))
        rows.append(
            {
                "id": tensor_id,
                "chunk_index": k + 1,
                "chunk": payload,
                "dim_count": t.rank,
                "dimensions": list(t.shape),
                "chunk_dim_count": chunk_dim,
                "dtype": t.dtype.code,
            }
        )
    return rows


def _check_meta(rows) -> tuple[tuple, int, ElementType, str]:
    first = rows[0]
    tensor_id = first["id"]
    meta = (
        first["dim_count"],
        tuple(first["dimensions"]),
        first["chunk_dim_count"],
        first["dtype"],
    )
    for row in rows[1:]:
        other = (
            row["dim_count"],
            tuple(row["dimensions"]),
            row["chunk_dim_count"],
            row["dtype"],
        )
        if row["id"] != tensor_id or other != meta:
            raise InconsistentMeta("rows disagree on id or metadata columns")
    dim_count, dims, chunk_dim, dtype_code = meta
    if dim_count != len(dims):
        raise InconsistentMeta(f"dim_count {dim_count} != len(dimensions) {len(dims)}")
    return dims, chunk_dim, ElementType.from_code(dtype_code), tensor_id


def ftsf_decode(rows: list[dict]) -> DenseTensor:
    """Reassemble the original tensor from chunk rows, in any row order."""
    if not rows:
        raise MissingChunk("no rows to decode")
    dims, chunk_dim, dtype, _ = _check_meta(rows)
    lead_dims, chunk_shape = _split_shape(dims, chunk_dim)
    lead_count = math.prod(lead_dims)
    seen = {row["chunk_index"] for row in rows}
    if seen != set(range(1, lead_count + 1)) or len(rows) != lead_count:
        missing = sorted(set(range(1, lead_count + 1)) - seen)
        raise MissingChunk(
            f"need chunk indices 1..{lead_count}, missing {missing[:8]}"
        )
    out = np.empty((lead_count,) + chunk_shape, dtype=dtype.np_dtype)
    for row in rows:
        chunk = dense_from_bytes(row["chunk"])
        if chunk.shape != chunk_shape or chunk.dtype is not dtype:
            raise ShapeMismatch(
                f"chunk {row['chunk_index']} has shape {chunk.shape}, "
                f"expected {chunk_shape}"
            )
        out[row["chunk_index"] - 1] = chunk.data
    return DenseTensor(dims, dtype, out.reshape(dims))


def ftsf_write(table: Table, t: DenseTensor, tensor_id: str, chunk_dim: int) -> None:
    rows = ftsf_encode(t, chunk_dim, tensor_id)
    table.append_rows(rows)
    table.set_tensor_meta(
        tensor_id,
        layout=LAYOUT_NAME,
        dense_shape=list(t.shape),
        dtype=t.dtype.label,
        chunk_dim_count=chunk_dim,
    )


def _selected_chunks(lead_dims, resolved_lead) -> list[int]:
    grids = np.meshgrid(
        *[np.arange(a, b) for a, b in resolved_lead], indexing="ij"
    )
    coords = np.stack([g.reshape(-1) for g in grids], axis=1)
    flat = np.ravel_multi_index(tuple(coords.T), lead_dims)
    return [int(v) + 1 for v in flat]


def ftsf_select_rows(
    table: Table, tensor_id: str, s: SliceSpec
) -> tuple[list[dict], ScanStats]:
    """Fetch only the chunk rows a leading-dimension slice needs.

    ``rows_scanned`` in the returned stats counts fetched chunk rows.
    """
    meta = table.tensor_meta(tensor_id)
    dims = tuple(meta["dense_shape"])
    chunk_dim = meta["chunk_dim_count"]
    lead_dims, _ = _split_shape(dims, chunk_dim)
    resolved = s.resolve(dims)
    for axis in range(len(lead_dims), len(dims)):
        if not s.is_full(axis, dims):
            raise MergedDimSliced(
                f"dimension {axis} is merged into chunks and cannot be sliced; "
                f"decode the tensor and slice it instead"
            )
    wanted = set(_selected_chunks(lead_dims, resolved[: len(lead_dims)]))
    rows, scan_stats = table.scan_filtered(
        tensor_id, lambda row: row["chunk_index"] in wanted
    )
    stats = ScanStats(
        rows_scanned=len(rows),
        bytes_read=scan_stats.bytes_read,
        segments_opened=scan_stats.segments_opened,
    )
    return rows, stats


def ftsf_assemble_slice(rows: list[dict], s: SliceSpec) -> DenseTensor:
    """Stitch fetched chunk rows into the sliced tensor."""
    if not rows:
        raise MissingChunk("slice selected no chunks")
    dims, chunk_dim, dtype, _ = _check_meta(rows)
    lead_dims, chunk_shape = _split_shape(dims, chunk_dim)
    resolved = s.resolve(dims)
    window_lead = tuple(b - a for a, b in resolved[: len(lead_dims)])
    expected = _selected_chunks(lead_dims, resolved[: len(lead_dims)])
    by_index = {row["chunk_index"]: row for row in rows}
    if set(by_index) != set(expected):
        raise MissingChunk("fetched rows do not cover the slice window")
    out = np.empty((len(expected),) + chunk_shape, dtype=dtype.np_dtype)
    # Row-major order over the window equals ascending chunk index order.
    for pos, chunk_index in enumerate(expected):
        chunk = dense_from_bytes(by_index[chunk_index]["chunk"])
        if chunk.shape != chunk_shape:
            raise ShapeMismatch(f"chunk {chunk_index} has shape {chunk.shape}")
        out[pos] = chunk.data
    return DenseTensor(window_lead + chunk_shape, dtype, out)


def ftsf_read_slice(
    table: Table, tensor_id: str, s: SliceSpec
) -> tuple[DenseTensor, ScanStats]:
    """Slice with pushdown: equals slicing the decoded tensor, but fetches
    only the chunk rows whose leading coordinate falls inside the slice."""
    rows, stats = ftsf_select_rows(table, tensor_id, s)
    return ftsf_assemble_slice(rows, s), stats
