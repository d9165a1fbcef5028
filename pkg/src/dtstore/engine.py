"""Layout dispatch: one write/read/slice surface over all six layouts."""
from __future__ import annotations

import numpy as np

from . import bsgs, csf, ftsf, sparse
from .errors import DtError, MergedDimSliced, TooLargeForDense, UnknownId
from .store import Table
from .tensor import (
    CooTensor,
    DenseTensor,
    SliceSpec,
    coo_to_dense,
    dense_to_coo,
    element_count,
    slice_coo,
    slice_dense,
)

LAYOUTS = ("ftsf", "coo", "csr", "csc", "csf", "bsgs")
SPARSE_LAYOUTS = ("coo", "csr", "csc", "csf", "bsgs")

_SCHEMA_BY_LAYOUT = {
    "ftsf": "ftsf.v1",
    "coo": "coo.v1",
    "csr": "csr.v1",
    "csc": "csc.v1",
    "csf": "csf.v1",
    "bsgs": "bsgs.v1",
}

DEFAULT_DENSE_CAP = 1 << 26  # elements; guards accidental huge materializations
MAX_DEFAULT_BLOCK_DIM = 32


def schema_for_layout(layout: str) -> str:
    try:
        return _SCHEMA_BY_LAYOUT[layout]
    except KeyError:
        raise DtError(f"unknown layout {layout!r}") from None


def default_block_shape(dense_shape) -> tuple[int, ...]:
    """Trailing two dimensions, clipped to 32 each."""
    trailing = dense_shape[-2:] if len(dense_shape) >= 2 else dense_shape[-1:]
    return tuple(min(int(d), MAX_DEFAULT_BLOCK_DIM) for d in trailing)


def densify(c: CooTensor, cap_elements: int = DEFAULT_DENSE_CAP) -> DenseTensor:
    if element_count(c.dense_shape) > cap_elements:
        raise TooLargeForDense(
            f"{element_count(c.dense_shape)} elements exceed the cap of "
            f"{cap_elements}"
        )
    return coo_to_dense(c)


def write_tensor(
    table: Table,
    tensor,
    layout: str,
    tensor_id: str,
    *,
    chunk_dim: int | None = None,
    block_shape=None,
    chunk_len: int = sparse.DEFAULT_CHUNK_LEN,
) -> str:
    """Encode ``tensor`` (DenseTensor or CooTensor) into ``table``."""
    if table.schema_name != schema_for_layout(layout):
        raise DtError(
            f"table holds schema {table.schema_name!r}, layout {layout!r} "
            f"needs {schema_for_layout(layout)!r}"
        )
    if layout == "ftsf":
        if not isinstance(tensor, DenseTensor):
            raise DtError("ftsf stores dense tensors; densify the input first")
        if chunk_dim is None:
            chunk_dim = tensor.rank - 1
        ftsf.ftsf_write(table, tensor, tensor_id, chunk_dim)
        return tensor_id

    if isinstance(tensor, DenseTensor):
        source_dtype = tensor.dtype.label
        c = dense_to_coo(tensor)
    else:
        source_dtype = None
        c = tensor
    if layout == "coo":
        sparse.coo_write(table, c, tensor_id)
    elif layout in ("csr", "csc"):
        orientation = "row" if layout == "csr" else "col"
        sparse.csr_write(
            table, sparse.csr_encode(c, orientation, tensor_id), chunk_len
        )
    elif layout == "csf":
        csf.csf_write(table, csf.csf_encode(c, tensor_id), chunk_len)
    elif layout == "bsgs":
        if block_shape is None:
            block_shape = default_block_shape(c.dense_shape)
        bsgs.bsgs_write(table, c, block_shape, tensor_id)
    else:
        raise DtError(f"unknown layout {layout!r}")
    if source_dtype is not None:
        table.set_tensor_meta(tensor_id, source_dtype=source_dtype)
    return tensor_id


def decode_rows(layout: str, rows: list[dict], meta: dict):
    """Pure decode of scanned rows; the t_de half of a full read."""
    shape = tuple(meta["dense_shape"])
    if layout == "ftsf":
        return ftsf.ftsf_decode(rows)
    if not rows:
        empty = np.empty((0, len(shape)), dtype=np.int64)
        return CooTensor(shape, empty, np.empty(0))
    if layout == "coo":
        return sparse.coo_decode_rows(rows)
    if layout in ("csr", "csc"):
        return sparse.csr_decode(sparse.rows_to_csr(rows))
    if layout == "csf":
        return csf.csf_decode(csf.rows_to_csf(rows))
    if layout == "bsgs":
        return bsgs.bsgs_decode(rows)
    raise DtError(f"unknown layout {layout!r}")


def layout_of(table: Table, tensor_id: str) -> str:
    meta = table.tensor_meta(tensor_id)
    layout = meta.get("layout", "").lower()
    if layout not in LAYOUTS:
        raise UnknownId(f"id {tensor_id!r} has no usable layout record")
    return layout


def read_tensor(table: Table, tensor_id: str):
    """Full read; returns (DenseTensor or CooTensor, ScanStats)."""
    layout = layout_of(table, tensor_id)
    meta = table.tensor_meta(tensor_id)
    rows, stats = table.scan(tensor_id)
    return decode_rows(layout, rows, meta), stats


def read_slice(table: Table, tensor_id: str, s: SliceSpec):
    """Slice read, pushed down where the layout supports it.

    FTSF handles leading-dimension slices in storage and falls back to
    decode-then-slice when a merged dimension is restricted.  CSF pushes
    the first-dimension range down and filters the remaining dimensions
    in memory.  BSGS pushes any slice down.  COO/CSR/CSC decode fully,
    then slice.  Sparse results are re-based to the slice window.
    """
    layout = layout_of(table, tensor_id)
    meta = table.tensor_meta(tensor_id)
    shape = tuple(meta["dense_shape"])
    if layout == "ftsf":
        try:
            return ftsf.ftsf_read_slice(table, tensor_id, s)
        except MergedDimSliced:
            tensor, stats = read_tensor(table, tensor_id)
            return slice_dense(tensor, s), stats
    if layout == "bsgs":
        return bsgs.bsgs_read_slice(table, tensor_id, s)
    if layout == "csf":
        resolved = s.resolve(shape)
        sub, stats = csf.csf_read_slice(table, tensor_id, resolved[0])
        return slice_coo(sub, s), stats
    tensor, stats = read_tensor(table, tensor_id)
    return slice_coo(tensor, s), stats
