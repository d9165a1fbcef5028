"""Block sparse generic storage: fixed-shape dense blocks in a sparse grid.

The block shape covers the trailing M dimensions; leading dimensions get
implicit size-1 blocks.  Dimensions that do not divide evenly are padded
logically with zeros, so every stored block carries a full, row-major
flattened value vector.  Only blocks containing at least one nonzero get
a row, keyed by their block-grid coordinates, which is what makes slice
pushdown a plain filter over the indices column.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import (
    BadBlockShape,
    DuplicateBlock,
    InconsistentMeta,
    UnknownId,
)
from .store import ScanStats, Table
from .tensor import CooTensor, Dims, SliceSpec, check_tensor_id, slice_coo

LAYOUT_NAME = "BSGS"
SCHEMA = "bsgs.v1"


def _check_block_shape(dense_shape: Dims, block_shape) -> Dims:
    block_shape = tuple(int(b) for b in block_shape)
    if not 1 <= len(block_shape) <= len(dense_shape):
        raise BadBlockShape(
            f"block rank {len(block_shape)} invalid for tensor rank {len(dense_shape)}"
        )
    if any(b < 1 for b in block_shape):
        raise BadBlockShape(f"block dims must be >= 1, got {block_shape}")
    return block_shape


def grid_shape(dense_shape: Dims, block_shape: Dims) -> Dims:
    """Block-grid dimensions: leading dims as-is, trailing dims ceil-divided."""
    lead = len(dense_shape) - len(block_shape)
    return dense_shape[:lead] + tuple(
        -(-d // b) for d, b in zip(dense_shape[lead:], block_shape)
    )


def bsgs_encode(c: CooTensor, block_shape, tensor_id: str) -> list[dict]:
    """One row per nonzero block, sorted by grid coordinate."""
    check_tensor_id(tensor_id)
    block_shape = _check_block_shape(c.dense_shape, block_shape)
    lead = c.rank - len(block_shape)
    block = np.asarray(block_shape, dtype=np.int64)
    block_size = math.prod(block_shape)

    if c.nnz == 0:
        return []
    grid = c.indices.copy()
    grid[:, lead:] //= block
    offsets = c.indices[:, lead:] % block
    flat_off = (
        np.ravel_multi_index(tuple(offsets.T), block_shape)
        if len(block_shape) > 0
        else np.zeros(c.nnz, dtype=np.int64)
    )
    uniq, inverse = np.unique(grid, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    shape_list = list(c.dense_shape)
    block_list = list(block_shape)
    rows = []
    for g in range(len(uniq)):
        members = np.flatnonzero(inverse == g)
        values = np.zeros(block_size, dtype=np.float64)
        values[flat_off[members]] = c.values[members]
        rows.append(
            {
                "id": tensor_id,
                "dense_shape": shape_list,
                "block_shape": block_list,
                "indices": uniq[g].tolist(),
                "values": values.tolist(),
            }
        )
    return rows


def bsgs_decode(rows: list[dict]) -> CooTensor:
    """Scatter each block at its grid offset; padding and zeros drop out."""
    if not rows:
        raise ValueError(
            "cannot decode zero block rows; the shape lives in the table manifest"
        )
    first = rows[0]
    tensor_id = first["id"]
    dense_shape = tuple(first["dense_shape"])
    block_shape = tuple(first["block_shape"])
    for row in rows:
        if (
            row["id"] != tensor_id
            or tuple(row["dense_shape"]) != dense_shape
            or tuple(row["block_shape"]) != block_shape
        ):
            raise InconsistentMeta("rows disagree on id, dense_shape or block_shape")
    seen = {tuple(row["indices"]) for row in rows}
    if len(seen) != len(rows):
        raise DuplicateBlock("more than one row for the same grid coordinate")

    lead = len(dense_shape) - len(block_shape)
    block_size = math.prod(block_shape)
    local = np.column_stack(np.unravel_index(np.arange(block_size), block_shape))
    bounds = np.asarray(dense_shape[lead:], dtype=np.int64)

    all_idx, all_vals = [], []
    for row in rows:
        values = np.asarray(row["values"], dtype=np.float64)
        if len(values) != block_size:
            raise InconsistentMeta(
                f"block at {row['indices']} has {len(values)} values, "
                f"expected {block_size}"
            )
        grid = np.asarray(row["indices"], dtype=np.int64)
        keep = values != 0.0
        if not keep.any():
            continue
        trailing = grid[lead:] * np.asarray(block_shape, dtype=np.int64) + local[keep]
        inside = (trailing < bounds).all(axis=1)
        trailing = trailing[inside]
        vals = values[keep][inside]
        if not len(vals):
            continue
        leading = np.broadcast_to(grid[:lead], (len(vals), lead))
        all_idx.append(np.column_stack([leading, trailing]))
        all_vals.append(vals)
    if not all_idx:
        empty = np.empty((0, len(dense_shape)), dtype=np.int64)
        return CooTensor(dense_shape, empty, np.empty(0))
    return CooTensor(
        dense_shape, np.concatenate(all_idx), np.concatenate(all_vals)
    )


def bsgs_write(table: Table, c: CooTensor, block_shape, tensor_id: str) -> None:
    block_shape = _check_block_shape(c.dense_shape, block_shape)
    rows = bsgs_encode(c, block_shape, tensor_id)
    if rows:
        table.append_rows(rows)
    table.set_tensor_meta(
        tensor_id,
        layout=LAYOUT_NAME,
        dense_shape=list(c.dense_shape),
        block_shape=list(block_shape),
    )


def bsgs_read(table: Table, tensor_id: str) -> tuple[CooTensor, ScanStats]:
    meta = table.tensor_meta(tensor_id)
    rows, stats = table.scan(tensor_id)
    if not rows:
        shape = tuple(meta["dense_shape"])
        empty = np.empty((0, len(shape)), dtype=np.int64)
        return CooTensor(shape, empty, np.empty(0)), stats
    return bsgs_decode(rows), stats


def _intersects(grid, lead, block_shape, resolved) -> bool:
    """Does the block at ``grid`` cover any coordinate inside the slice?"""
    for axis, (start, end) in enumerate(resolved):
        if axis < lead:
            lo = hi = grid[axis]
            hi += 1
        else:
            b = block_shape[axis - lead]
            lo = grid[axis] * b
            hi = lo + b
        if hi <= start or lo >= end:
            return False
    return True


def bsgs_select_rows(
    table: Table, tensor_id: str, s: SliceSpec
) -> tuple[list[dict], ScanStats, Dims, Dims]:
    """Fetch only the block rows whose covered range intersects the slice.

    ``rows_scanned`` in the returned stats counts fetched block rows.
    """
    meta = table.tensor_meta(tensor_id)
    if meta.get("layout") != LAYOUT_NAME:
        raise UnknownId(f"id {tensor_id!r} is not stored as {LAYOUT_NAME}")
    dense_shape = tuple(meta["dense_shape"])
    block_shape = tuple(meta["block_shape"])
    resolved = s.resolve(dense_shape)
    lead = len(dense_shape) - len(block_shape)
    rows, scan_stats = table.scan_filtered(
        tensor_id,
        lambda row: _intersects(row["indices"], lead, block_shape, resolved),
    )
    stats = ScanStats(
        rows_scanned=len(rows),
        bytes_read=scan_stats.bytes_read,
        segments_opened=scan_stats.segments_opened,
    )
    return rows, stats, dense_shape, block_shape


def bsgs_assemble_slice(
    rows: list[dict], s: SliceSpec, dense_shape: Dims, block_shape: Dims
) -> CooTensor:
    """Rebuild only the fetched blocks, then trim and re-base to the slice."""
    if not rows:
        resolved = s.resolve(dense_shape)
        shape = tuple(b - a for a, b in resolved)
        empty = np.empty((0, len(shape)), dtype=np.int64)
        return CooTensor(shape, empty, np.empty(0))
    return slice_coo(bsgs_decode(rows), s)


def bsgs_read_slice(
    table: Table, tensor_id: str, s: SliceSpec
) -> tuple[CooTensor, ScanStats]:
    """Slice with pushdown: look up the id, take the shapes from its
    manifest record, filter intersecting block rows, rebuild just those
    blocks, and trim.  The result is re-based to the slice window, so
    densifying it equals :func:`dtstore.tensor.slice_dense` of the
    decoded tensor.
    """
    rows, stats, dense_shape, block_shape = bsgs_select_rows(table, tensor_id, s)
    return bsgs_assemble_slice(rows, s, dense_shape, block_shape), stats
