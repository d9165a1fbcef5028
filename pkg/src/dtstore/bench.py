"""Synthetic tensors, space/time metrics, and repeated-trial measurement.

Writes decompose into encode time plus serialization time; reads into
deserialization time plus decode time, for the whole tensor and for one
slice.  The compression ratio divides the encoded table size by the size
of the tensor's plain binary container.  All byte counts and row
counters are deterministic; wall-clock phases are reported but never
asserted against.
"""
from __future__ import annotations

import json
import platform
import random
import time
from dataclasses import dataclass, field

import numpy as np

from . import bsgs, csf, engine, ftsf, sparse
from .containers import coo_to_bytes, dense_to_bytes
from .errors import DensityTooHigh, DtError, TooLargeForDense, VerificationFailed
from .store import MemoryStore, Table
from .tensor import (
    CooTensor,
    DenseTensor,
    SliceSpec,
    element_count,
    slice_coo,
    slice_dense,
)

UNIT_UNIFORM = "unit_uniform"
POSITIVE_COUNTS = "positive_counts"

DEFAULT_TRIALS = 10
TIMING_NAMES = (
    "t_en", "t_ser", "t_des", "t_de", "t_write", "t_read_tensor", "t_read_slice",
)


@dataclass(frozen=True)
class GenSpec:
    """Seed-determined sparse tensor recipe (the synthetic dataset)."""

    shape: tuple[int, ...]
    density: float
    seed: int
    value_dist: str = POSITIVE_COUNTS

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(d) for d in self.shape))
        if self.value_dist not in (UNIT_UNIFORM, POSITIVE_COUNTS):
            raise ValueError(f"unknown value distribution {self.value_dist!r}")


def gen_sparse(spec: GenSpec) -> CooTensor:
    """Exactly round(density * element_count) distinct seeded coordinates.

    Uses the stdlib Mersenne Twister through ``random.random()`` only,
    which is guaranteed reproducible across Python versions, so stored
    golden checksums stay valid.
    """
    if spec.density > 1.0:
        raise DensityTooHigh(f"density {spec.density} exceeds 1.0")
    if spec.density <= 0.0:
        raise ValueError(f"density must be positive, got {spec.density}")
    total = element_count(spec.shape)
    target = round(spec.density * total)
    rng = random.Random(spec.seed)
    if target == total:
        offsets = np.arange(total, dtype=np.int64)
    else:
        # Rejection sampling: redraw on collision until exactly target
        # distinct offsets exist.  One draw per step keeps the membership
        # (and so the byte-exact output) independent of set internals.
        chosen: set[int] = set()
        while len(chosen) < target:
            chosen.add(int(rng.random() * total))
        offsets = np.fromiter(sorted(chosen), dtype=np.int64, count=target)
    if spec.value_dist == UNIT_UNIFORM:
        values = np.fromiter(
            (1.0 - rng.random() for _ in range(target)), dtype=np.float64,
            count=target,
        )
    else:
        values = np.fromiter(
            (1.0 + int(rng.random() * 100.0) for _ in range(target)),
            dtype=np.float64, count=target,
        )
    if target:
        indices = np.column_stack(np.unravel_index(offsets, spec.shape))
    else:
        indices = np.empty((0, len(spec.shape)), dtype=np.int64)
    return CooTensor(spec.shape, indices, values)


def baseline_bytes(
    c: CooTensor, kind: str, *, dense_cap_elements: int = engine.DEFAULT_DENSE_CAP
) -> int:
    """Size of the tensor as a plain container: the denominator of c_r."""
    if kind == "coo":
        return len(coo_to_bytes(c))
    if kind == "dense":
        if element_count(c.dense_shape) > dense_cap_elements:
            raise TooLargeForDense(
                f"{element_count(c.dense_shape)} elements exceed the cap of "
                f"{dense_cap_elements}"
            )
        return len(dense_to_bytes(engine.densify(c, dense_cap_elements)))
    raise ValueError(f"baseline kind must be 'coo' or 'dense', got {kind!r}")


@dataclass(frozen=True)
class TrialRecord:
    """Nanosecond phase timings of one trial; sums are by construction."""

    t_en: int
    t_ser: int
    t_des: int
    t_de: int
    t_slice_des: int
    t_slice_de: int

    @property
    def t_write(self) -> int:
        return self.t_ser + self.t_en

    @property
    def t_read_tensor(self) -> int:
        return self.t_des + self.t_de

    @property
    def t_read_slice(self) -> int:
        return self.t_slice_des + self.t_slice_de

    def named(self, name: str) -> int:
        if name in ("t_en", "t_ser", "t_des", "t_de"):
            return getattr(self, name)
        return {"t_write": self.t_write, "t_read_tensor": self.t_read_tensor,
                "t_read_slice": self.t_read_slice}[name]


@dataclass
class LayoutResult:
    layout: str
    s_encode_bytes: int
    s_baseline_bytes: int
    c_r: float
    trials: list[TrialRecord]
    rows_scanned_full: int
    rows_scanned_slice: int

    def timing_stats(self, name: str) -> dict:
        samples = [trial.named(name) for trial in self.trials]
        return {
            "mean": sum(samples) / len(samples),
            "min": min(samples),
            "max": max(samples),
        }


@dataclass
class BenchReport:
    shape: tuple[int, ...]
    density: float
    seed: int
    trials: int
    environment: str
    results: list[LayoutResult] = field(default_factory=list)


def _environment_note() -> str:
    return (
        f"python {platform.python_version()} on "
        f"{platform.system().lower()}-{platform.machine()}"
    )


def _default_slice(rank: int) -> SliceSpec:
    return SliceSpec(((0, 1),) + (None,) * (rank - 1))


def run_bench(
    spec: GenSpec,
    layouts,
    *,
    trials: int = DEFAULT_TRIALS,
    slice_spec: SliceSpec | None = None,
    store=None,
    prefix: str = "bench",
    chunk_dim: int | None = None,
    block_shape=None,
    chunk_len: int = 65_536,
    dense_cap_elements: int = engine.DEFAULT_DENSE_CAP,
) -> BenchReport:
    """Measure every layout over ``trials`` repetitions of write/read/slice.

    A layout's entry is only emitted after its decoded tensor compares
    equal to the generated source and its slice equals the slice oracle.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    unknown = [l for l in layouts if l not in engine.LAYOUTS]
    if unknown:
        raise DtError(f"unknown layouts {unknown}")
    if store is None:
        store = MemoryStore()
    source = gen_sparse(spec)
    s = slice_spec if slice_spec is not None else _default_slice(len(spec.shape))
    dense_source = None
    if "ftsf" in layouts:
        dense_source = engine.densify(source, dense_cap_elements)

    report = BenchReport(
        shape=spec.shape,
        density=spec.density,
        seed=spec.seed,
        trials=trials,
        environment=_environment_note(),
    )
    for layout in layouts:
        tensor = dense_source if layout == "ftsf" else source
        opts = _resolve_options(layout, tensor, chunk_dim, block_shape, chunk_len)
        records = []
        s_encode = rows_full = rows_slice = None
        for trial in range(trials):
            table = Table.create(
                store, f"{prefix}/{layout}/t{trial}", engine.schema_for_layout(layout)
            )
            tensor_id = f"bench-{layout}"

            t0 = time.perf_counter_ns()
            rows = _encode(layout, tensor, tensor_id, opts)
            t_en = time.perf_counter_ns() - t0
            t1 = time.perf_counter_ns()
            _write_payload(table, layout, tensor, tensor_id, rows, opts)
            t_ser = time.perf_counter_ns() - t1

            t2 = time.perf_counter_ns()
            scanned, full_stats = table.scan(tensor_id)
            t_des = time.perf_counter_ns() - t2
            meta = table.tensor_meta(tensor_id)
            t3 = time.perf_counter_ns()
            decoded = engine.decode_rows(layout, scanned, meta)
            t_de = time.perf_counter_ns() - t3
            if decoded != tensor:
                raise VerificationFailed(
                    f"{layout} decode does not match the generated tensor"
                )

            t4 = time.perf_counter_ns()
            fetched, slice_stats = _slice_fetch(table, layout, tensor_id, s)
            t_slice_des = time.perf_counter_ns() - t4
            t5 = time.perf_counter_ns()
            sliced = _slice_assemble(table, layout, tensor_id, fetched, s, meta)
            t_slice_de = time.perf_counter_ns() - t5
            expected = (
                slice_dense(tensor, s) if layout == "ftsf" else slice_coo(source, s)
            )
            if sliced != expected:
                raise VerificationFailed(
                    f"{layout} slice does not match the slice oracle"
                )

            records.append(
                TrialRecord(t_en, t_ser, t_des, t_de, t_slice_des, t_slice_de)
            )
            if trial == 0:
                s_encode = table.size_bytes()
                rows_full = full_stats.rows_scanned
                rows_slice = slice_stats.rows_scanned
        baseline_kind = "dense" if layout == "ftsf" else "coo"
        s_baseline = baseline_bytes(
            source, baseline_kind, dense_cap_elements=dense_cap_elements
        )
        report.results.append(
            LayoutResult(
                layout=layout,
                s_encode_bytes=s_encode,
                s_baseline_bytes=s_baseline,
                c_r=s_encode / s_baseline,
                trials=records,
                rows_scanned_full=rows_full,
                rows_scanned_slice=rows_slice,
            )
        )
    return report


def _resolve_options(layout, tensor, chunk_dim, block_shape, chunk_len):
    opts = {"chunk_len": chunk_len}
    if layout == "ftsf":
        opts["chunk_dim"] = tensor.rank - 1 if chunk_dim is None else chunk_dim
    if layout == "bsgs":
        opts["block_shape"] = tuple(
            block_shape
            if block_shape is not None
            else engine.default_block_shape(tensor.dense_shape)
        )
    return opts


def _encode(layout, tensor, tensor_id, opts):
    """The pure encoding phase: tensor in, table rows out."""
    if layout == "ftsf":
        return ftsf.ftsf_encode(tensor, opts["chunk_dim"], tensor_id)
    if layout == "coo":
        return sparse.coo_encode_rows(tensor, tensor_id)
    if layout in ("csr", "csc"):
        orientation = "row" if layout == "csr" else "col"
        e = sparse.csr_encode(tensor, orientation, tensor_id)
        return sparse.csr_to_rows(e, opts["chunk_len"])
    if layout == "csf":
        return csf.csf_to_rows(csf.csf_encode(tensor, tensor_id), opts["chunk_len"])
    return bsgs.bsgs_encode(tensor, opts["block_shape"], tensor_id)


def _write_payload(table, layout, tensor, tensor_id, rows, opts):
    """The serialization phase: segment bytes plus manifest updates."""
    if rows:
        table.append_rows(rows)
    meta = {"dense_shape": list(
        tensor.shape if isinstance(tensor, DenseTensor) else tensor.dense_shape
    )}
    if layout == "ftsf":
        meta.update(
            layout="FTSF", dtype=tensor.dtype.label,
            chunk_dim_count=opts["chunk_dim"],
        )
    elif layout == "coo":
        meta.update(layout="COO")
    elif layout in ("csr", "csc"):
        meta.update(layout=layout.upper(), chunk_len=opts["chunk_len"])
    elif layout == "csf":
        meta.update(layout="CSF", chunk_len=opts["chunk_len"])
    else:
        meta.update(layout="BSGS", block_shape=list(opts["block_shape"]))
    table.set_tensor_meta(tensor_id, **meta)


def _slice_fetch(table, layout, tensor_id, s: SliceSpec):
    if layout == "ftsf":
        return ftsf.ftsf_select_rows(table, tensor_id, s)
    if layout == "bsgs":
        rows, stats, dense_shape, block_shape = bsgs.bsgs_select_rows(
            table, tensor_id, s
        )
        return (rows, dense_shape, block_shape), stats
    if layout == "csf":
        meta = table.tensor_meta(tensor_id)
        resolved = s.resolve(tuple(meta["dense_shape"]))
        header, chunks, stats = csf.csf_select_slice_rows(
            table, tensor_id, resolved[0]
        )
        return (header, chunks), stats
    return table.scan(tensor_id)


def _slice_assemble(table, layout, tensor_id, fetched, s: SliceSpec, meta):
    if layout == "ftsf":
        return ftsf.ftsf_assemble_slice(fetched, s)
    if layout == "bsgs":
        rows, dense_shape, block_shape = fetched
        return bsgs.bsgs_assemble_slice(rows, s, dense_shape, block_shape)
    if layout == "csf":
        header, chunks = fetched
        resolved = s.resolve(tuple(meta["dense_shape"]))
        chunk_len = meta.get("chunk_len", csf.DEFAULT_CHUNK_LEN)
        sub = csf.csf_assemble_slice(header, chunks, resolved[0], chunk_len)
        return slice_coo(sub, s)
    return slice_coo(engine.decode_rows(layout, fetched, meta), s)


# --- report emission ---

def _result_to_obj(result: LayoutResult) -> dict:
    return {
        "layout": result.layout,
        "s_encode_bytes": result.s_encode_bytes,
        "s_baseline_bytes": result.s_baseline_bytes,
        "c_r": result.c_r,
        "timings": {name: result.timing_stats(name) for name in TIMING_NAMES},
        "rows_scanned": {
            "full": result.rows_scanned_full,
            "slice": result.rows_scanned_slice,
        },
        "trials": [
            {
                "t_en": tr.t_en,
                "t_ser": tr.t_ser,
                "t_des": tr.t_des,
                "t_de": tr.t_de,
                "t_slice_des": tr.t_slice_des,
                "t_slice_de": tr.t_slice_de,
                "t_write": tr.t_write,
                "t_read_tensor": tr.t_read_tensor,
                "t_read_slice": tr.t_read_slice,
            }
            for tr in result.trials
        ],
    }


def emit_report(report: BenchReport, fmt: str = "json") -> bytes:
    """Stable-ordered report document; json round-trips exactly."""
    if fmt == "json":
        doc = {
            "spec": {
                "shape": list(report.shape),
                "density": report.density,
                "seed": report.seed,
                "trials": report.trials,
            },
            "environment": report.environment,
            "results": [_result_to_obj(result) for result in report.results],
        }
        return (json.dumps(doc, indent=2) + "\n").encode("utf-8")
    if fmt == "csv":
        header = ["layout", "s_encode_bytes", "s_baseline_bytes", "c_r"]
        for name in TIMING_NAMES:
            header += [f"{name}_mean", f"{name}_min", f"{name}_max"]
        header += ["rows_scanned_full", "rows_scanned_slice"]
        lines = [",".join(header)]
        for result in report.results:
            cells = [
                result.layout,
                str(result.s_encode_bytes),
                str(result.s_baseline_bytes),
                repr(result.c_r),
            ]
            for name in TIMING_NAMES:
                stats = result.timing_stats(name)
                cells += [repr(stats["mean"]), str(stats["min"]), str(stats["max"])]
            cells += [str(result.rows_scanned_full), str(result.rows_scanned_slice)]
            lines.append(",".join(cells))
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValueError(f"format must be 'json' or 'csv', got {fmt!r}")


def parse_report(data: bytes) -> BenchReport:
    """Inverse of the json form of :func:`emit_report`."""
    doc = json.loads(data.decode("utf-8"))
    report = BenchReport(
        shape=tuple(doc["spec"]["shape"]),
        density=doc["spec"]["density"],
        seed=doc["spec"]["seed"],
        trials=doc["spec"]["trials"],
        environment=doc["environment"],
    )
    for entry in doc["results"]:
        trials = [
            TrialRecord(
                t_en=tr["t_en"],
                t_ser=tr["t_ser"],
                t_des=tr["t_des"],
                t_de=tr["t_de"],
                t_slice_des=tr["t_slice_des"],
                t_slice_de=tr["t_slice_de"],
            )
            for tr in entry["trials"]
        ]
        report.results.append(
            LayoutResult(
                layout=entry["layout"],
                s_encode_bytes=entry["s_encode_bytes"],
                s_baseline_bytes=entry["s_baseline_bytes"],
                c_r=entry["c_r"],
                trials=trials,
                rows_scanned_full=entry["rows_scanned"]["full"],
                rows_scanned_slice=entry["rows_scanned"]["slice"],
            )
        )
    return report
