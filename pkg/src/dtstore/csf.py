"""Compressed sparse fiber: a per-dimension tree packed into arrays.

Level k holds one node per distinct (k+1)-long coordinate prefix of the
sorted nonzeros.  ``fids[k]`` stores each node's index in dimension k;
``fptrs[k]`` delimits the children of each level-k node inside
``fids[k+1]``.  Shared prefixes are stored once, values sit at the
leaves, one per nonzero.  The leaf level needs no pointer array because
values align one-to-one with ``fids[N-1]``.

Persistence keeps the first two levels in a single header row and chunks
the deeper index/pointer arrays and the values, so a first-dimension
slice can bound which chunks it fetches from the header alone.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InconsistentMeta,
    LengthMismatch,
    MalformedPointers,
    MissingChunk,
    RangeOutOfBounds,
    RankTooLow,
)
from .store import ScanStats, Table
from .tensor import CooTensor, Dims, check_tensor_id

LAYOUT_NAME = "CSF"
SCHEMA = "csf.v1"
HEADER_SEQ = -1
DEFAULT_CHUNK_LEN = 65_536


@dataclass(eq=False)
class CsfEncoded:
    id: str
    dense_shape: Dims
    fids: list[np.ndarray] = field(default_factory=list)
    fptrs: list[np.ndarray] = field(default_factory=list)
    values: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        self.dense_shape = tuple(int(d) for d in self.dense_shape)
        self.fids = [np.asarray(a, dtype=np.int64) for a in self.fids]
        self.fptrs = [np.asarray(a, dtype=np.int64) for a in self.fptrs]
        self.values = np.asarray(self.values, dtype=np.float64)

    @property
    def rank(self) -> int:
        return len(self.dense_shape)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CsfEncoded):
            return NotImplemented
        return (
            self.id == other.id
            and self.dense_shape == other.dense_shape
            and len(self.fids) == len(other.fids)
            and all(np.array_equal(a, b) for a, b in zip(self.fids, other.fids))
            and len(self.fptrs) == len(other.fptrs)
            and all(np.array_equal(a, b) for a, b in zip(self.fptrs, other.fptrs))
            and self.values.tobytes() == other.values.tobytes()
        )


def csf_encode(c: CooTensor, tensor_id: str) -> CsfEncoded:
    """Build the level arrays from sorted coordinates.

    Walks the dimensions breadth-first: level k keeps the distinct
    (k+1)-prefixes, deduplicating index values shared between nonzeros.
    """
    check_tensor_id(tensor_id)
    if c.rank < 2:
        raise RankTooLow("CSF needs rank >= 2; store rank-1 tensors as COO")
    idx = c.indices
    nnz = c.nnz
    rank = c.rank
    if nnz == 0:
        fids = [np.empty(0, dtype=np.int64) for _ in range(rank)]
        fptrs = [np.zeros(1, dtype=np.int64) for _ in range(rank - 1)]
        return CsfEncoded(tensor_id, c.dense_shape, fids, fptrs, np.empty(0))

    # new[k][i] is True when row i starts a new distinct (k+1)-prefix.
    new = np.empty((rank, nnz), dtype=bool)
    new[:, 0] = True
    changed = np.zeros(nnz - 1, dtype=bool)
    for k in range(rank):
        changed |= idx[1:, k] != idx[:-1, k]
        new[k, 1:] = changed

    fids = [idx[new[k], k].copy() for k in range(rank)]
    fptrs = []
    for k in range(rank - 1):
        parent_of_child = np.cumsum(new[k]) - 1  # level-k node of each row
        child_starts = parent_of_child[new[k + 1]]
        counts = np.bincount(child_starts, minlength=len(fids[k]))
        pointer = np.zeros(len(fids[k]) + 1, dtype=np.int64)
        np.cumsum(counts, out=pointer[1:])
        fptrs.append(pointer)
    return CsfEncoded(tensor_id, c.dense_shape, fids, fptrs, c.values.copy())


def _check_structure(e: CsfEncoded) -> None:
    rank = e.rank
    if len(e.fids) != rank or len(e.fptrs) != rank - 1:
        raise MalformedPointers(
            f"rank-{rank} tensor needs {rank} fid and {rank - 1} fptr arrays"
        )
    for k, pointer in enumerate(e.fptrs):
        if len(pointer) != len(e.fids[k]) + 1:
            raise MalformedPointers(
                f"fptrs[{k}] has {len(pointer)} entries for {len(e.fids[k])} nodes"
            )
        if len(pointer) and pointer[0] != 0:
            raise MalformedPointers(f"fptrs[{k}] does not start at 0")
        if (np.diff(pointer) < 0).any():
            raise MalformedPointers(f"fptrs[{k}] is not non-decreasing")
        if pointer[-1] != len(e.fids[k + 1]):
            raise MalformedPointers(
                f"fptrs[{k}] ends at {pointer[-1]} but level {k + 1} "
                f"has {len(e.fids[k + 1])} nodes"
            )
    if len(e.values) != len(e.fids[rank - 1]):
        raise LengthMismatch(
            f"{len(e.values)} values for {len(e.fids[rank - 1])} leaf nodes"
        )


def csf_decode(e: CsfEncoded) -> CooTensor:
    """Expand every root-to-leaf path back into a coordinate row."""
    _check_structure(e)
    if e.nnz == 0:
        empty = np.empty((0, e.rank), dtype=np.int64)
        return CooTensor(e.dense_shape, empty, np.empty(0))
    coords = e.fids[0][:, None]
    for k in range(1, e.rank):
        counts = np.diff(e.fptrs[k - 1])
        coords = np.repeat(coords, counts, axis=0)
        coords = np.column_stack([coords, e.fids[k]])
    return CooTensor(e.dense_shape, coords, e.values)


def csf_to_rows(e: CsfEncoded, chunk_len: int = DEFAULT_CHUNK_LEN) -> list[dict]:
    """Header row with levels 0-1, then chunked deeper arrays and values."""
    if chunk_len < 1:
        raise ValueError("chunk_len must be >= 1")
    _check_structure(e)
    rank = e.rank
    header = {
        "id": e.id,
        "layout": LAYOUT_NAME,
        "dense_shape": list(e.dense_shape),
        "fptr_zero": e.fptrs[0].tolist(),
        "fid_zero": e.fids[0].tolist(),
        "fptr_one": e.fptrs[1].tolist() if rank >= 3 else [],
        "fid_one": e.fids[1].tolist(),
        "array_kind": "",
        "chunk_seq": HEADER_SEQ,
        "i64_payload": [],
        "f64_payload": [],
    }
    rows = [header]

    def chunk_rows(kind: str, arr: np.ndarray, as_f64: bool):
        for seq, start in enumerate(range(0, len(arr), chunk_len)):
            piece = arr[start : start + chunk_len].tolist()
            rows.append(
                {
                    "id": e.id,
                    "layout": "",
                    "dense_shape": [],
                    "fptr_zero": [],
                    "fid_zero": [],
                    "fptr_one": [],
                    "fid_one": [],
                    "array_kind": kind,
                    "chunk_seq": seq,
                    "i64_payload": [] if as_f64 else piece,
                    "f64_payload": piece if as_f64 else [],
                }
            )

    for k in range(2, rank):
        chunk_rows(f"fids{k}", e.fids[k], as_f64=False)
        if k < rank - 1:
            chunk_rows(f"fptrs{k}", e.fptrs[k], as_f64=False)
    chunk_rows("values", e.values, as_f64=True)
    return rows


def _gather_chunks(rows: list[dict], kind: str, as_f64: bool) -> np.ndarray:
    chunks = sorted(
        (row for row in rows if row["array_kind"] == kind),
        key=lambda row: row["chunk_seq"],
    )
    if [row["chunk_seq"] for row in chunks] != list(range(len(chunks))):
        raise MissingChunk(f"chunk sequence for {kind!r} is not contiguous from 0")
    key = "f64_payload" if as_f64 else "i64_payload"
    dtype = np.float64 if as_f64 else np.int64
    if not chunks:
        return np.empty(0, dtype=dtype)
    return np.concatenate([np.asarray(row[key], dtype=dtype) for row in chunks])


def rows_to_csf(rows: list[dict]) -> CsfEncoded:
    headers = [row for row in rows if row["chunk_seq"] == HEADER_SEQ]
    if len(headers) != 1:
        raise InconsistentMeta(f"expected exactly one header row, got {len(headers)}")
    header = headers[0]
    shape = tuple(header["dense_shape"])
    rank = len(shape)
    if rank < 2:
        raise RankTooLow(f"CSF header carries rank-{rank} shape")
    fids = [np.asarray(header["fid_zero"], dtype=np.int64),
            np.asarray(header["fid_one"], dtype=np.int64)]
    fptrs = [np.asarray(header["fptr_zero"], dtype=np.int64)]
    if rank >= 3:
        fptrs.append(np.asarray(header["fptr_one"], dtype=np.int64))
    for k in range(2, rank):
        fids.append(_gather_chunks(rows, f"fids{k}", as_f64=False))
        if k < rank - 1:
            fptrs.append(_gather_chunks(rows, f"fptrs{k}", as_f64=False))
    values = _gather_chunks(rows, "values", as_f64=True)
    return CsfEncoded(header["id"], shape, fids, fptrs, values)


def csf_write(
    table: Table, e: CsfEncoded, chunk_len: int = DEFAULT_CHUNK_LEN
) -> None:
    table.append_rows(csf_to_rows(e, chunk_len))
    table.set_tensor_meta(
        e.id,
        layout=LAYOUT_NAME,
        dense_shape=list(e.dense_shape),
        chunk_len=chunk_len,
    )


def csf_read(table: Table, tensor_id: str) -> tuple[CsfEncoded, ScanStats]:
    table.tensor_meta(tensor_id)
    rows, stats = table.scan(tensor_id)
    return rows_to_csf(rows), stats


def _chunk_window(chunk_len: int, start: int, stop: int) -> set[int]:
    """Chunk sequence numbers covering array positions [start, stop)."""
    if stop <= start:
        return set()
    return set(range(start // chunk_len, (stop - 1) // chunk_len + 1))


def csf_select_slice_rows(
    table: Table, tensor_id: str, first_dim_range: tuple[int, int]
) -> tuple[dict, list[dict], ScanStats]:
    """Fetch the header plus only the chunks a first-dimension slice needs.

    The header's level-0 arrays bound the level-1/2 windows directly;
    deeper windows are learned by fetching each pointer level in turn, so
    chunks wholly outside the slice are never fetched.
    """
    meta = table.tensor_meta(tensor_id)
    shape = tuple(meta["dense_shape"])
    rank = len(shape)
    chunk_len = meta.get("chunk_len", DEFAULT_CHUNK_LEN)
    start, end = int(first_dim_range[0]), int(first_dim_range[1])
    if not 0 <= start < end <= shape[0]:
        raise RangeOutOfBounds(
            f"range [{start}, {end}) invalid for first dimension of size {shape[0]}"
        )
    header_rows, stats = table.scan_filtered(
        tensor_id, lambda row: row["chunk_seq"] == HEADER_SEQ
    )
    if len(header_rows) != 1:
        raise InconsistentMeta(
            f"expected exactly one header row, got {len(header_rows)}"
        )
    header = header_rows[0]

    fid_zero = np.asarray(header["fid_zero"], dtype=np.int64)
    fptr_zero = np.asarray(header["fptr_zero"], dtype=np.int64)
    lo = int(np.searchsorted(fid_zero, start, side="left"))
    hi = int(np.searchsorted(fid_zero, end, side="left"))
    chunk_rows: list[dict] = []
    if lo < hi:
        spans = {1: (int(fptr_zero[lo]), int(fptr_zero[hi]))}
        if rank >= 3:
            fptr_one = np.asarray(header["fptr_one"], dtype=np.int64)
            a, b = spans[1]
            spans[2] = (int(fptr_one[a]), int(fptr_one[b]))
        for k in range(2, rank - 1):
            a, b = spans[k]
            kind, seqs = f"fptrs{k}", _chunk_window(chunk_len, a, b + 1)
            rows_k, st = table.scan_filtered(
                tensor_id,
                lambda row, kind=kind, seqs=seqs: (
                    row["array_kind"] == kind and row["chunk_seq"] in seqs
                ),
            )
            stats.bytes_read += st.bytes_read
            stats.segments_opened += st.segments_opened
            chunk_rows.extend(rows_k)
            ptr = _array_window(rows_k, kind, chunk_len, a, b + 1, as_f64=False)
            spans[k + 1] = (int(ptr[0]), int(ptr[-1]))
        wanted = {
            f"fids{k}": _chunk_window(chunk_len, *spans[k]) for k in range(2, rank)
        }
        wanted["values"] = _chunk_window(chunk_len, *spans[rank - 1])
        rows_f, st = table.scan_filtered(
            tensor_id,
            lambda row: row["chunk_seq"] != HEADER_SEQ
            and row["chunk_seq"] in wanted.get(row["array_kind"], ()),
        )
        stats.bytes_read += st.bytes_read
        stats.segments_opened += st.segments_opened
        chunk_rows.extend(rows_f)
    stats.rows_scanned = 1 + len(chunk_rows)
    return header, chunk_rows, stats


def _array_window(
    rows: list[dict], kind: str, chunk_len: int, start: int, stop: int, as_f64: bool
) -> np.ndarray:
    """Positions [start, stop) of a chunked array from its fetched chunks."""
    key = "f64_payload" if as_f64 else "i64_payload"
    dtype = np.float64 if as_f64 else np.int64
    chunks = sorted(
        (row for row in rows if row["array_kind"] == kind),
        key=lambda row: row["chunk_seq"],
    )
    if stop <= start:
        return np.empty(0, dtype=dtype)
    if not chunks:
        raise MissingChunk(f"no chunks fetched for {kind!r}")
    first_seq = chunks[0]["chunk_seq"]
    joined = np.concatenate([np.asarray(row[key], dtype=dtype) for row in chunks])
    offset = first_seq * chunk_len
    return joined[start - offset : stop - offset]


def csf_assemble_slice(
    header: dict,
    chunk_rows: list[dict],
    first_dim_range: tuple[int, int],
    chunk_len: int = DEFAULT_CHUNK_LEN,
) -> CooTensor:
    """Rebuild the in-range nonzeros; coordinates stay unshifted."""
    shape = tuple(header["dense_shape"])
    rank = len(shape)
    start, end = int(first_dim_range[0]), int(first_dim_range[1])
    fid_zero = np.asarray(header["fid_zero"], dtype=np.int64)
    fptr_zero = np.asarray(header["fptr_zero"], dtype=np.int64)
    lo = int(np.searchsorted(fid_zero, start, side="left"))
    hi = int(np.searchsorted(fid_zero, end, side="left"))
    if lo >= hi:
        empty = np.empty((0, rank), dtype=np.int64)
        return CooTensor(shape, empty, np.empty(0))

    fids = [fid_zero[lo:hi]]
    ptr = fptr_zero[lo : hi + 1]
    fptrs = [ptr - ptr[0]]
    span = (int(ptr[0]), int(ptr[-1]))
    fid_one = np.asarray(header["fid_one"], dtype=np.int64)
    fids.append(fid_one[span[0] : span[1]])
    for k in range(1, rank - 1):
        if k == 1:
            source = np.asarray(header["fptr_one"], dtype=np.int64)
            ptr = source[span[0] : span[1] + 1]
        else:
            ptr = _array_window(
                chunk_rows, f"fptrs{k}", chunk_len, span[0], span[1] + 1, as_f64=False
            )
        next_span = (int(ptr[0]), int(ptr[-1]))
        fptrs.append(ptr - ptr[0])
        fids.append(
            _array_window(
                chunk_rows, f"fids{k + 1}", chunk_len, next_span[0], next_span[1],
                as_f64=False,
            )
        )
        span = next_span
    values = _array_window(
        chunk_rows, "values", chunk_len, span[0], span[1], as_f64=True
    )
    sub = CsfEncoded(header["id"], shape, fids, fptrs, values)
    return csf_decode(sub)


def csf_read_slice(
    table: Table, tensor_id: str, first_dim_range: tuple[int, int]
) -> tuple[CooTensor, ScanStats]:
    """Nonzeros whose first coordinate falls in ``[start, end)``.

    Coordinates are returned unshifted against the full dense shape;
    ``rows_scanned`` counts the header plus fetched chunk rows only.
    """
    header, chunk_rows, stats = csf_select_slice_rows(
        table, tensor_id, first_dim_range
    )
    meta = table.tensor_meta(tensor_id)
    chunk_len = meta.get("chunk_len", DEFAULT_CHUNK_LEN)
    return csf_assemble_slice(header, chunk_rows, first_dim_range, chunk_len), stats
