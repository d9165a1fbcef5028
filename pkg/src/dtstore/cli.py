"""The ``dt`` command line: write, read, slice, bench, inspect.

Exit codes: 0 success, 1 usage error, 2 data error.  stdout carries only
results (ids, paths, table listings); diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

from . import bench, engine
from .containers import (
    coo_to_bytes,
    dense_to_bytes,
    load_tensor,
)
from .errors import DtError, ParseError
from .store import LocalStore, Table
from .tensor import (
    CooTensor,
    DenseTensor,
    SliceSpec,
    TensorClass,
    check_tensor_id,
    classify,
    dense_to_coo,
    generate_id,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_slice_spec(text: str) -> SliceSpec:
    """Numpy-ish slice text: ``0:100,:,:,:`` or single indices like ``5``."""
    ranges = []
    for pos, token in enumerate(text.split(",")):
        tok = token.strip()
        if tok == ":":
            ranges.append(None)
            continue
        try:
            if ":" in tok:
                left, right = tok.split(":")
                ranges.append((int(left), int(right)))
            else:
                k = int(tok)
                ranges.append((k, k + 1))
        except ValueError:
            raise ParseError(
                f"bad slice token {token!r} at position {pos}"
            ) from None
    return SliceSpec(tuple(ranges))


def _parse_dims(text: str, flag: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated integers, got {text!r}")
    if not dims:
        raise UsageError(f"{flag} needs at least one dimension")
    return dims


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dt", description="tensor table storage")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("write", help="encode a tensor file into a table")
    p.add_argument("--input", required=True)
    p.add_argument("--table", required=True)
    p.add_argument(
        "--layout", required=True,
        choices=["ftsf", "coo", "csr", "csc", "csf", "bsgs", "auto"],
    )
    p.add_argument("--id", dest="tensor_id")
    p.add_argument("--chunk-dim", type=int)
    p.add_argument("--block-shape")

    p = sub.add_parser("read", help="decode a stored tensor to a file")
    p.add_argument("--table", required=True)
    p.add_argument("--id", dest="tensor_id", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("slice", help="read a slice of a stored tensor")
    p.add_argument("--table", required=True)
    p.add_argument("--id", dest="tensor_id", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="run the measurement harness")
    p.add_argument("--shape", required=True)
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--layouts", required=True)
    p.add_argument("--trials", type=int, default=bench.DEFAULT_TRIALS)
    p.add_argument("--slice", dest="slice_text")
    p.add_argument("--report", required=True)
    p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("inspect", help="print table schema, ids and sizes")
    p.add_argument("--table", required=True)
    return parser


def _open_or_create(table_dir: str, layout: str) -> Table:
    store = LocalStore(table_dir)
    if Table.exists(store, ""):
        table = Table.open(store, "")
        needed = engine.schema_for_layout(layout)
        if table.schema_name != needed:
            raise DtError(
                f"table {table_dir} holds schema {table.schema_name!r}; "
                f"layout {layout!r} needs {needed!r}"
            )
        return table
    return Table.create(store, "", engine.schema_for_layout(layout))


def _cmd_write(args) -> int:
    tensor = load_tensor(args.input)
    layout = args.layout
    if layout == "auto":
        c = dense_to_coo(tensor) if isinstance(tensor, DenseTensor) else tensor
        layout = "ftsf" if classify(c) is TensorClass.GENERAL else "bsgs"
    if layout == "ftsf" and isinstance(tensor, CooTensor):
        tensor = engine.densify(tensor)
    block_shape = (
        _parse_dims(args.block_shape, "--block-shape") if args.block_shape else None
    )
    table = _open_or_create(args.table, layout)
    tensor_id = args.tensor_id or generate_id(layout, len(
        tensor.shape if isinstance(tensor, DenseTensor) else tensor.dense_shape
    ))
    check_tensor_id(tensor_id)
    if table.has_tensor(tensor_id):
        raise DtError(f"id {tensor_id!r} already exists in {args.table}")
    engine.write_tensor(
        table, tensor, layout, tensor_id,
        chunk_dim=args.chunk_dim, block_shape=block_shape,
    )
    print(tensor_id)
    return 0


def _cmd_read(args) -> int:
    table = Table.open(LocalStore(args.table), "")
    tensor, _ = engine.read_tensor(table, args.tensor_id)
    data = (
        dense_to_bytes(tensor)
        if isinstance(tensor, DenseTensor)
        else coo_to_bytes(tensor)
    )
    Path(args.out).write_bytes(data)
    print(args.out)
    return 0


def _cmd_slice(args) -> int:
    table = Table.open(LocalStore(args.table), "")
    spec = parse_slice_spec(args.spec)
    result, _ = engine.read_slice(table, args.tensor_id, spec)
    data = (
        dense_to_bytes(result)
        if isinstance(result, DenseTensor)
        else coo_to_bytes(result)
    )
    Path(args.out).write_bytes(data)
    print(args.out)
    return 0


def _cmd_bench(args) -> int:
    spec = bench.GenSpec(
        shape=_parse_dims(args.shape, "--shape"),
        density=args.density,
        seed=args.seed,
    )
    layouts = [part.strip() for part in args.layouts.split(",") if part.strip()]
    slice_spec = parse_slice_spec(args.slice_text) if args.slice_text else None
    with tempfile.TemporaryDirectory(prefix="dtbench-") as scratch:
        report = bench.run_bench(
            spec, layouts,
            trials=args.trials,
            slice_spec=slice_spec,
            store=LocalStore(scratch),
        )
    Path(args.report).write_bytes(bench.emit_report(report, args.format))
    print(args.report)
    return 0


def _cmd_inspect(args) -> int:
    table = Table.open(LocalStore(args.table), "")
    print(f"schema\t{table.schema_name}")
    print(f"total_bytes\t{table.size_bytes()}")
    for tensor_id in table.tensor_ids():
        meta = table.tensor_meta(tensor_id)
        rows, _ = table.scan(tensor_id)
        shape = ",".join(str(d) for d in meta.get("dense_shape", []))
        print(f"tensor\t{tensor_id}\t{meta.get('layout', '?')}\t{shape}\t{len(rows)}")
    return 0


_COMMANDS = {
    "write": _cmd_write,
    "read": _cmd_read,
    "slice": _cmd_slice,
    "bench": _cmd_bench,
    "inspect": _cmd_inspect,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"dt: {exc}", file=sys.stderr)
        return 1
    except ParseError as exc:
        print(f"dt: {exc}", file=sys.stderr)
        return 1
    except DtError as exc:
        print(f"dt: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"dt: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
