"""In-memory tensor representations: dense buffers, sparse COO, slicing.

Indices are zero-based everywhere.  COO coordinates are kept
lexicographically sorted, in-bounds, duplicate-free and with explicit
zeros dropped, so every encoding downstream sees one canonical form.
"""
from __future__ import annotations

import math
import secrets
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    BadTensorId,
    DuplicateCoordinate,
    LengthMismatch,
    OutOfBounds,
    RangeOutOfBounds,
    RankMismatch,
)

Dims = tuple[int, ...]

# Density below which a tensor is treated as sparse; exactly at the
# threshold counts as general.
SPARSITY_THRESHOLD = 0.10


class ElementType(Enum):
    """Supported element types with their wire codes and numpy dtypes."""

    U8 = ("u8", 0, np.uint8)
    F32 = ("f32", 1, np.float32)
    F64 = ("f64", 2, np.float64)

    def __init__(self, label: str, code: int, np_dtype):
        self.label = label
        self.code = code
        self.np_dtype = np.dtype(np_dtype)

    @property
    def itemsize(self) -> int:
        return self.np_dtype.itemsize

    @classmethod
    def from_code(cls, code: int) -> "ElementType":
        for member in cls:
            if member.code == code:
                return member
        raise ValueError(f"unknown element type code {code}")

    @classmethod
    def from_label(cls, label: str) -> "ElementType":
        for member in cls:
            if member.label == label:
                return member
        raise ValueError(f"unknown element type {label!r}")


class TensorClass(Enum):
    SPARSE = "sparse"
    GENERAL = "general"


def check_shape(dims) -> Dims:
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise LengthMismatch("shape needs at least one dimension")
    if any(d < 1 for d in dims):
        raise LengthMismatch(f"all dimensions must be >= 1, got {dims}")
    return dims


def element_count(dims) -> int:
    return math.prod(dims)


def _read_only(arr: np.ndarray) -> np.ndarray:
    # A view so the flag never leaks back to a caller-owned array.
    view = arr.view()
    view.setflags(write=False)
    return view


@dataclass(eq=False)
class DenseTensor:
    """A rank-N tensor backed by one contiguous row-major buffer."""

    shape: Dims
    dtype: ElementType
    data: np.ndarray

    def __post_init__(self):
        self.shape = check_shape(self.shape)
        arr = np.asarray(self.data, dtype=self.dtype.np_dtype)
        if arr.shape != self.shape:
            if arr.size != element_count(self.shape):
                raise LengthMismatch(
                    f"buffer has {arr.size} elements, shape {self.shape} "
                    f"needs {element_count(self.shape)}"
                )
            arr = arr.reshape(self.shape)
        self.data = _read_only(np.ascontiguousarray(arr))

    @property
    def rank(self) -> int:
        return len(self.shape)

    @property
    def element_count(self) -> int:
        return element_count(self.shape)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.dtype is other.dtype
            and self.data.tobytes() == other.data.tobytes()
        )

    def __repr__(self) -> str:
        return f"DenseTensor(shape={self.shape}, dtype={self.dtype.label})"


@dataclass(eq=False)
class CooTensor:
    """Sorted coordinate form: the interchange hub between all encodings.

    ``indices`` is an (nnz, N) int64 array, ``values`` an (nnz,) float64
    array.  Construction canonicalizes: explicit zeros are dropped, rows
    are sorted lexicographically, and duplicate coordinates raise.
    """

    dense_shape: Dims
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.dense_shape = check_shape(self.dense_shape)
        rank = len(self.dense_shape)
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.size == 0:
            idx = idx.reshape(0, rank)
        if idx.ndim != 2 or idx.shape[1] != rank:
            raise LengthMismatch(
                f"index rows must have width {rank}, got array of shape {idx.shape}"
            )
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if len(vals) != len(idx):
            raise LengthMismatch(
                f"{len(idx)} index rows but {len(vals)} values"
            )
        if len(idx):
            if idx.min() < 0 or (idx >= np.asarray(self.dense_shape)).any():
                raise OutOfBounds(
                    f"coordinates out of bounds for shape {self.dense_shape}"
                )
            keep = vals != 0.0
            idx, vals = idx[keep], vals[keep]
        if len(idx):
            order = np.lexsort(idx.T[::-1])
            idx, vals = idx[order], vals[order]
            dup = (idx[1:] == idx[:-1]).all(axis=1)
            if dup.any():
                where = int(np.flatnonzero(dup)[0])
                raise DuplicateCoordinate(
                    f"coordinate {tuple(idx[where])} appears more than once"
                )
        self.indices = _read_only(np.ascontiguousarray(idx))
        self.values = _read_only(np.ascontiguousarray(vals))

    @property
    def rank(self) -> int:
        return len(self.dense_shape)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CooTensor):
            return NotImplemented
        return (
            self.dense_shape == other.dense_shape
            and np.array_equal(self.indices, other.indices)
            and self.values.tobytes() == other.values.tobytes()
        )

    def __repr__(self) -> str:
        return f"CooTensor(dense_shape={self.dense_shape}, nnz={self.nnz})"


@dataclass(frozen=True)
class SliceSpec:
    """Per-dimension selection: ``None`` keeps the whole dimension, an
    ``(start, end)`` pair keeps the half-open window ``[start, end)``."""

    ranges: tuple

    def __post_init__(self):
        object.__setattr__(
            self,
            "ranges",
            tuple(None if r is None else (int(r[0]), int(r[1])) for r in self.ranges),
        )

    @classmethod
    def full(cls, rank: int) -> "SliceSpec":
        return cls((None,) * rank)

    @property
    def rank(self) -> int:
        return len(self.ranges)

    def resolve(self, shape: Dims) -> tuple[tuple[int, int], ...]:
        """Bounds-check against ``shape`` and expand Full dimensions."""
        if len(self.ranges) != len(shape):
            raise RankMismatch(
                f"slice has {len(self.ranges)} ranges but tensor rank is {len(shape)}"
            )
        out = []
        for d, r in zip(shape, self.ranges):
            if r is None:
                out.append((0, d))
                continue
            start, end = r
            if not (0 <= start < end <= d):
                raise RangeOutOfBounds(
                    f"range [{start}, {end}) invalid for dimension of size {d}"
                )
            out.append((start, end))
        return tuple(out)

    def out_shape(self, shape: Dims) -> Dims:
        return tuple(end - start for start, end in self.resolve(shape))

    def is_full(self, dim: int, shape: Dims) -> bool:
        r = self.ranges[dim]
        return r is None or r == (0, shape[dim])


def make_dense(shape, dtype: ElementType, data) -> DenseTensor:
    """Wrap a row-major element buffer of exactly the right length."""
    shape = check_shape(shape)
    arr = np.asarray(data, dtype=dtype.np_dtype).reshape(-1)
    if arr.size != element_count(shape):
        raise LengthMismatch(
            f"buffer has {arr.size} elements, shape {shape} "
            f"needs {element_count(shape)}"
        )
    return DenseTensor(shape, dtype, arr)


def dense_to_coo(t: DenseTensor) -> CooTensor:
    """Collect the nonzero elements of ``t`` with their coordinates."""
    idx = np.argwhere(t.data)
    vals = t.data[tuple(idx.T)] if len(idx) else np.empty(0)
    return CooTensor(t.shape, idx, np.asarray(vals, dtype=np.float64))


def coo_to_dense(c: CooTensor) -> DenseTensor:
    """Materialize ``c`` as a float64 dense tensor (the decode direction)."""
    if (c.indices < 0).any() or (c.indices >= np.asarray(c.dense_shape)).any():
        raise OutOfBounds(f"coordinates out of bounds for shape {c.dense_shape}")
    out = np.zeros(c.dense_shape, dtype=np.float64)
    if c.nnz:
        out[tuple(c.indices.T)] = c.values
    return DenseTensor(c.dense_shape, ElementType.F64, out)


def slice_dense(t: DenseTensor, s: SliceSpec) -> DenseTensor:
    """Reference slicing: the oracle for every encoded slice path."""
    resolved = s.resolve(t.shape)
    window = t.data[tuple(slice(a, b) for a, b in resolved)]
    return DenseTensor(
        tuple(b - a for a, b in resolved), t.dtype, np.ascontiguousarray(window)
    )


def slice_coo(c: CooTensor, s: SliceSpec) -> CooTensor:
    """Sparse analog of :func:`slice_dense`: filter, re-base, reshape."""
    resolved = s.resolve(c.dense_shape)
    starts = np.asarray([a for a, _ in resolved], dtype=np.int64)
    ends = np.asarray([b for _, b in resolved], dtype=np.int64)
    keep = ((c.indices >= starts) & (c.indices < ends)).all(axis=1)
    return CooTensor(
        tuple(int(e - a) for a, e in zip(starts, ends)),
        c.indices[keep] - starts,
        c.values[keep],
    )


def compose_slices(outer: SliceSpec, inner: SliceSpec, shape: Dims) -> SliceSpec:
    """A slice of a slice, expressed against the original ``shape``."""
    outer_resolved = outer.resolve(shape)
    inner_resolved = inner.resolve(tuple(b - a for a, b in outer_resolved))
    return SliceSpec(
        tuple(
            (o_start + i_start, o_start + i_end)
            for (o_start, _), (i_start, i_end) in zip(outer_resolved, inner_resolved)
        )
    )


def density(c: CooTensor) -> float:
    """nnz over total element count, without materializing anything."""
    return c.nnz / element_count(c.dense_shape)


def classify(c: CooTensor) -> TensorClass:
    """Route to an encoding family: strictly below 10% density is sparse."""
    if density(c) < SPARSITY_THRESHOLD:
        return TensorClass.SPARSE
    return TensorClass.GENERAL


def check_tensor_id(tensor_id: str) -> str:
    if not tensor_id:
        raise BadTensorId("tensor id must be non-empty")
    if any(ch.isspace() for ch in tensor_id) or "/" in tensor_id or "\\" in tensor_id:
        raise BadTensorId(f"tensor id {tensor_id!r} contains whitespace or separators")
    return tensor_id


def generate_id(layout: str, rank: int) -> str:
    """New id of the form ``{layout}-{N}d-{12 hex chars}``."""
    return f"{layout.lower()}-{rank}d-{secrets.token_hex(6)}"
