"""dtstore: dense and sparse tensors encoded into columnar table storage.

Six layouts over one table format: chunked dense storage (FTSF),
coordinate rows (COO), compressed sparse row/column (CSR/CSC),
compressed sparse fiber (CSF) and block sparse generic storage (BSGS),
persisted as checksummed columnar segments on a key-value object store,
with slice pushdown where the layout supports it and a benchmark harness
for space and time measurements.
"""

from .bench import BenchReport, GenSpec, baseline_bytes, emit_report, gen_sparse, parse_report, run_bench
from .bsgs import bsgs_decode, bsgs_encode, bsgs_read, bsgs_read_slice, bsgs_write
from .containers import (
    coo_from_bytes,
    coo_to_bytes,
    dense_from_bytes,
    dense_to_bytes,
    load_coo,
    load_dense,
    load_tensor,
    save_coo,
    save_dense,
)
from .csf import (
    CsfEncoded,
    csf_decode,
    csf_encode,
    csf_read,
    csf_read_slice,
    csf_to_rows,
    csf_write,
    rows_to_csf,
)
from .engine import (
    LAYOUTS,
    default_block_shape,
    read_slice,
    read_tensor,
    schema_for_layout,
    write_tensor,
)
from .ftsf import ftsf_decode, ftsf_encode, ftsf_read_slice, ftsf_write
from .sparse import (
    CsrEncoded,
    coo_decode_rows,
    coo_encode_rows,
    coo_read,
    coo_write,
    csr_decode,
    csr_encode,
    csr_read,
    csr_to_rows,
    csr_write,
    flatten_to_matrix,
    rows_to_csr,
)
from .segment import SCHEMAS, read_segment, segment_info, write_segment
from .store import LocalStore, MemoryStore, ScanStats, Table, create_table, open_table
from .tensor import (
    CooTensor,
    DenseTensor,
    ElementType,
    SliceSpec,
    TensorClass,
    classify,
    compose_slices,
    coo_to_dense,
    dense_to_coo,
    density,
    generate_id,
    make_dense,
    slice_coo,
    slice_dense,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
