from __future__ import annotations

import json

import pytest

from dtstore import (
    ElementType,
    SliceSpec,
    coo_to_dense,
    load_coo,
    load_dense,
    save_coo,
    save_dense,
    slice_coo,
    slice_dense,
)
from dtstore.cli import main, parse_slice_spec
from dtstore.errors import ParseError

from conftest import random_coo, random_dense


class TestParseSliceSpec:
    def test_numpy_style(self):
        assert parse_slice_spec("0:100,:,:,:") == SliceSpec(
            ((0, 100), None, None, None)
        )

    def test_all_full(self):
        assert parse_slice_spec(":,:,:") == SliceSpec.full(3)

    def test_single_index_sugar(self):
        assert parse_slice_spec("5,:,:") == SliceSpec(((5, 6), None, None))

    @pytest.mark.parametrize("bad", ["a,:,:", "1:2:3", "0:,:", ""])
    def test_parse_errors(self, bad):
        with pytest.raises(ParseError):
            parse_slice_spec(bad)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestWriteReadRoundtrip:
    def test_dense_ftsf(self, tmp_path, capsys):
        t = random_dense(50, (6, 3, 4), ElementType.F32)
        src = tmp_path / "in.dten"
        save_dense(src, t)
        code, out, err = run(
            capsys, "write", "--input", str(src), "--table", str(tmp_path / "tbl"),
            "--layout", "ftsf", "--id", "pics", "--chunk-dim", "2",
        )
        assert code == 0 and out.strip() == "pics" and err == ""

        dst = tmp_path / "out.dten"
        code, out, _ = run(
            capsys, "read", "--table", str(tmp_path / "tbl"),
            "--id", "pics", "--out", str(dst),
        )
        assert code == 0
        assert load_dense(dst) == t

    @pytest.mark.parametrize("layout", ["coo", "csr", "csc", "csf", "bsgs"])
    def test_sparse_layouts(self, tmp_path, capsys, layout):
        c = random_coo(51, (5, 6, 4), density=0.2)
        src = tmp_path / "in.dcoo"
        save_coo(src, c)
        code, out, _ = run(
            capsys, "write", "--input", str(src),
            "--table", str(tmp_path / f"tbl-{layout}"),
            "--layout", layout, "--id", "t",
        )
        assert code == 0 and out.strip() == "t"
        dst = tmp_path / "out.dcoo"
        code, _, _ = run(
            capsys, "read", "--table", str(tmp_path / f"tbl-{layout}"),
            "--id", "t", "--out", str(dst),
        )
        assert code == 0
        assert load_coo(dst) == c

    def test_auto_picks_bsgs_for_sparse(self, tmp_path, capsys):
        c = random_coo(52, (20, 20, 20), density=0.001)
        src = tmp_path / "in.dcoo"
        save_coo(src, c)
        code, out, _ = run(
            capsys, "write", "--input", str(src), "--table", str(tmp_path / "tbl"),
            "--layout", "auto",
        )
        assert code == 0
        tensor_id = out.strip()
        assert tensor_id.startswith("bsgs-3d-")
        manifest = json.loads((tmp_path / "tbl" / "manifest.json").read_text())
        assert manifest["tensors"][tensor_id]["layout"] == "BSGS"

    def test_auto_picks_ftsf_for_general(self, tmp_path, capsys):
        t = random_dense(53, (4, 4), ElementType.F64)
        src = tmp_path / "in.dten"
        save_dense(src, t)
        code, out, _ = run(
            capsys, "write", "--input", str(src), "--table", str(tmp_path / "tbl"),
            "--layout", "auto",
        )
        assert code == 0
        assert out.strip().startswith("ftsf-2d-")

    def test_generated_id_unique_per_write(self, tmp_path, capsys):
        c = random_coo(54, (5, 5), density=0.2)
        src = tmp_path / "in.dcoo"
        save_coo(src, c)
        table = str(tmp_path / "tbl")
        _, first, _ = run(capsys, "write", "--input", str(src), "--table", table, "--layout", "coo")
        _, second, _ = run(capsys, "write", "--input", str(src), "--table", table, "--layout", "coo")
        assert first.strip() != second.strip()


class TestSliceCommand:
    def test_ftsf_pushdown(self, tmp_path, capsys):
        t = random_dense(55, (8, 3, 4))
        save_dense(tmp_path / "in.dten", t)
        table = str(tmp_path / "tbl")
        run(capsys, "write", "--input", str(tmp_path / "in.dten"),
            "--table", table, "--layout", "ftsf", "--id", "t", "--chunk-dim", "2")
        out_path = tmp_path / "slice.dten"
        code, _, _ = run(
            capsys, "slice", "--table", table, "--id", "t",
            "--spec", "0:2,:,:", "--out", str(out_path),
        )
        assert code == 0
        assert load_dense(out_path) == slice_dense(t, SliceSpec(((0, 2), None, None)))

    def test_ftsf_merged_dim_falls_back_to_decode(self, tmp_path, capsys):
        t = random_dense(56, (4, 3, 4))
        save_dense(tmp_path / "in.dten", t)
        table = str(tmp_path / "tbl")
        run(capsys, "write", "--input", str(tmp_path / "in.dten"),
            "--table", table, "--layout", "ftsf", "--id", "t", "--chunk-dim", "2")
        out_path = tmp_path / "slice.dten"
        code, _, _ = run(
            capsys, "slice", "--table", table, "--id", "t",
            "--spec", ":,1,:", "--out", str(out_path),
        )
        assert code == 0
        assert load_dense(out_path) == slice_dense(t, SliceSpec((None, (1, 2), None)))

    @pytest.mark.parametrize("layout", ["coo", "csr", "csc", "csf", "bsgs"])
    def test_sparse_slices_match_oracle(self, tmp_path, capsys, layout):
        c = random_coo(57, (6, 5, 4), density=0.25)
        save_coo(tmp_path / "in.dcoo", c)
        table = str(tmp_path / f"tbl-{layout}")
        run(capsys, "write", "--input", str(tmp_path / "in.dcoo"),
            "--table", table, "--layout", layout, "--id", "t")
        out_path = tmp_path / "slice.dcoo"
        code, _, _ = run(
            capsys, "slice", "--table", table, "--id", "t",
            "--spec", "1:4,:,0:2", "--out", str(out_path),
        )
        assert code == 0
        spec = SliceSpec(((1, 4), None, (0, 2)))
        assert load_coo(out_path) == slice_coo(c, spec)


class TestBenchCommand:
    def test_json_report(self, tmp_path, capsys):
        report_path = tmp_path / "report.json"
        code, out, _ = run(
            capsys, "bench", "--shape", "8,6,4", "--density", "0.1", "--seed", "3",
            "--layouts", "coo,csf", "--trials", "2",
            "--report", str(report_path), "--format", "json",
        )
        assert code == 0 and out.strip() == str(report_path)
        doc = json.loads(report_path.read_text())
        assert [r["layout"] for r in doc["results"]] == ["coo", "csf"]
        assert doc["spec"]["trials"] == 2

    def test_csv_report_with_slice(self, tmp_path, capsys):
        report_path = tmp_path / "report.csv"
        code, _, _ = run(
            capsys, "bench", "--shape", "8,6", "--density", "0.2", "--seed", "3",
            "--layouts", "bsgs", "--trials", "1", "--slice", "0:2,:",
            "--report", str(report_path), "--format", "csv",
        )
        assert code == 0
        lines = report_path.read_text().splitlines()
        assert lines[0].startswith("layout,")
        assert lines[1].startswith("bsgs,")


class TestInspectAndErrors:
    def test_inspect_lists_tensors(self, tmp_path, capsys):
        c = random_coo(58, (4, 4), density=0.25)
        save_coo(tmp_path / "in.dcoo", c)
        table = str(tmp_path / "tbl")
        run(capsys, "write", "--input", str(tmp_path / "in.dcoo"),
            "--table", table, "--layout", "coo", "--id", "mine")
        code, out, _ = run(capsys, "inspect", "--table", table)
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "schema\tcoo.v1"
        assert any(line.startswith("tensor\tmine\tCOO\t4,4\t") for line in lines)

    def test_unknown_id_is_data_error(self, tmp_path, capsys):
        c = random_coo(59, (4, 4), density=0.25)
        save_coo(tmp_path / "in.dcoo", c)
        table = str(tmp_path / "tbl")
        run(capsys, "write", "--input", str(tmp_path / "in.dcoo"),
            "--table", table, "--layout", "coo", "--id", "t")
        code, out, err = run(
            capsys, "read", "--table", table, "--id", "ghost",
            "--out", str(tmp_path / "x.dcoo"),
        )
        assert code == 2
        assert "unknown id" in err
        assert out == ""

    def test_usage_error_is_exit_1(self, capsys):
        code, _, err = run(capsys, "write", "--input", "x")
        assert code == 1 and err != ""

    def test_bad_slice_spec_is_exit_1(self, tmp_path, capsys):
        c = random_coo(60, (4, 4), density=0.25)
        save_coo(tmp_path / "in.dcoo", c)
        table = str(tmp_path / "tbl")
        run(capsys, "write", "--input", str(tmp_path / "in.dcoo"),
            "--table", table, "--layout", "coo", "--id", "t")
        code, _, err = run(
            capsys, "slice", "--table", table, "--id", "t",
            "--spec", "nope", "--out", str(tmp_path / "x"),
        )
        assert code == 1 and "nope" in err

    def test_corrupt_input_is_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.dten"
        bad.write_bytes(b"garbage!")
        code, _, err = run(
            capsys, "write", "--input", str(bad),
            "--table", str(tmp_path / "tbl"), "--layout", "coo",
        )
        assert code == 2 and err != ""

    def test_duplicate_id_rejected(self, tmp_path, capsys):
        c = random_coo(61, (4, 4), density=0.25)
        save_coo(tmp_path / "in.dcoo", c)
        table = str(tmp_path / "tbl")
        code, _, _ = run(capsys, "write", "--input", str(tmp_path / "in.dcoo"),
                         "--table", table, "--layout", "coo", "--id", "t")
        assert code == 0
        code, _, err = run(capsys, "write", "--input", str(tmp_path / "in.dcoo"),
                           "--table", table, "--layout", "coo", "--id", "t")
        assert code == 2 and "already exists" in err

    def test_schema_mismatch_rejected(self, tmp_path, capsys):
        c = random_coo(62, (4, 4), density=0.25)
        save_coo(tmp_path / "in.dcoo", c)
        table = str(tmp_path / "tbl")
        run(capsys, "write", "--input", str(tmp_path / "in.dcoo"),
            "--table", table, "--layout", "coo", "--id", "a")
        code, _, err = run(capsys, "write", "--input", str(tmp_path / "in.dcoo"),
                           "--table", table, "--layout", "csf", "--id", "b")
        assert code == 2 and "schema" in err

    def test_dense_input_to_sparse_layout_records_dtype(self, tmp_path, capsys):
        t = random_dense(63, (4, 4), ElementType.U8)
        save_dense(tmp_path / "in.dten", t)
        table = str(tmp_path / "tbl")
        code, out, _ = run(capsys, "write", "--input", str(tmp_path / "in.dten"),
                           "--table", table, "--layout", "coo", "--id", "t")
        assert code == 0
        manifest = json.loads((tmp_path / "tbl" / "manifest.json").read_text())
        assert manifest["tensors"]["t"]["source_dtype"] == "u8"
        # values survive exactly (u8 widens losslessly into f64)
        dst = tmp_path / "out.dcoo"
        run(capsys, "read", "--table", table, "--id", "t", "--out", str(dst))
        assert coo_to_dense(load_coo(dst)).data.tolist() == t.data.astype(float).tolist()
