"""Standalone container files for single tensors.

Two formats, both little-endian:

* ``.dten`` - magic ``DTEN``, version u16, dtype u8 (0=u8, 1=f32, 2=f64),
  ndim u16, dims as ndim x u64, then the raw row-major payload.
* ``.dcoo`` - magic ``DCOO``, version u16, ndim u16, dims ndim x u64,
  nnz u64, indices nnz x ndim x i64, values nnz x f64.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, LengthMismatch, UnsupportedVersion
from .tensor import CooTensor, DenseTensor, ElementType

DTEN_MAGIC = b"DTEN"
DCOO_MAGIC = b"DCOO"
CONTAINER_VERSION = 1

_DTEN_HEAD = struct.Struct("<4sHBH")
_DCOO_HEAD = struct.Struct("<4sHH")


def dense_to_bytes(t: DenseTensor) -> bytes:
    head = _DTEN_HEAD.pack(DTEN_MAGIC, CONTAINER_VERSION, t.dtype.code, t.rank)
    dims = struct.pack(f"<{t.rank}Q", *t.shape)
    return head + dims + t.data.tobytes()


def dense_from_bytes(data: bytes) -> DenseTensor:
    if data[:4] != DTEN_MAGIC:
        raise BadMagic(f"expected DTEN magic, got {data[:4]!r}")
    _, version, dtype_code, ndim = _DTEN_HEAD.unpack_from(data)
    if version != CONTAINER_VERSION:
        raise UnsupportedVersion(f"dten version {version}")
    offset = _DTEN_HEAD.size
    shape = struct.unpack_from(f"<{ndim}Q", data, offset)
    offset += 8 * ndim
    dtype = ElementType.from_code(dtype_code)
    count = int(np.prod(shape))
    payload = data[offset:]
    if len(payload) != count * dtype.itemsize:
        raise LengthMismatch(
            f"payload is {len(payload)} bytes, expected {count * dtype.itemsize}"
        )
    buf = np.frombuffer(payload, dtype=dtype.np_dtype)
    return DenseTensor(shape, dtype, buf)


def coo_to_bytes(c: CooTensor) -> bytes:
    head = _DCOO_HEAD.pack(DCOO_MAGIC, CONTAINER_VERSION, c.rank)
    dims = struct.pack(f"<{c.rank}Q", *c.dense_shape)
    nnz = struct.pack("<Q", c.nnz)
    return head + dims + nnz + c.indices.tobytes() + c.values.tobytes()


def coo_from_bytes(data: bytes) -> CooTensor:
    if data[:4] != DCOO_MAGIC:
        raise BadMagic(f"expected DCOO magic, got {data[:4]!r}")
    _, version, ndim = _DCOO_HEAD.unpack_from(data)
    if version != CONTAINER_VERSION:
        raise UnsupportedVersion(f"dcoo version {version}")
    offset = _DCOO_HEAD.size
    shape = struct.unpack_from(f"<{ndim}Q", data, offset)
    offset += 8 * ndim
    (nnz,) = struct.unpack_from("<Q", data, offset)
    offset += 8
    idx_bytes = 8 * nnz * ndim
    if len(data) - offset != idx_bytes + 8 * nnz:
        raise LengthMismatch(
            f"payload is {len(data) - offset} bytes, expected {idx_bytes + 8 * nnz}"
        )
    indices = np.frombuffer(data, dtype=np.int64, count=nnz * ndim, offset=offset)
    values = np.frombuffer(data, dtype=np.float64, count=nnz, offset=offset + idx_bytes)
    return CooTensor(shape, indices.reshape(nnz, ndim), values)


def save_dense(path, t: DenseTensor) -> None:
    Path(path).write_bytes(dense_to_bytes(t))


def load_dense(path) -> DenseTensor:
    return dense_from_bytes(Path(path).read_bytes())


def save_coo(path, c: CooTensor) -> None:
    Path(path).write_bytes(coo_to_bytes(c))


def load_coo(path) -> CooTensor:
    return coo_from_bytes(Path(path).read_bytes())


def load_tensor(path):
    """Sniff the magic and load either container kind."""
    data = Path(path).read_bytes()
    if data[:4] == DTEN_MAGIC:
        return dense_from_bytes(data)
    if data[:4] == DCOO_MAGIC:
        return coo_from_bytes(data)
    raise BadMagic(f"unrecognized container magic {data[:4]!r}")
