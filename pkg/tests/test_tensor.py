from __future__ import annotations

import numpy as np
import pytest

from dtstore import (
    CooTensor,
    ElementType,
    SliceSpec,
    TensorClass,
    classify,
    compose_slices,
    coo_to_dense,
    dense_to_coo,
    density,
    make_dense,
    slice_coo,
    slice_dense,
)
from dtstore.errors import (
    BadTensorId,
    DuplicateCoordinate,
    LengthMismatch,
    OutOfBounds,
    RangeOutOfBounds,
    RankMismatch,
)
from dtstore.tensor import check_tensor_id, generate_id

from conftest import random_dense
from oracles import brute_slice


class TestMakeDense:
    def test_row_major_layout(self):
        t = make_dense((2, 2), ElementType.F64, [1, 2, 3, 4])
        assert t.data[1, 0] == 3.0

    def test_zero_tensor(self):
        t = make_dense((3, 3, 3), ElementType.F64, [0.0] * 27)
        assert not t.data.any()

    def test_wrong_length(self):
        with pytest.raises(LengthMismatch):
            make_dense((2, 2), ElementType.F64, [1, 2, 3])

    def test_buffer_not_mutable(self):
        t = make_dense((2,), ElementType.F64, [1.0, 2.0])
        with pytest.raises(ValueError):
            t.data[0] = 9.0


class TestCooRoundtrip:
    def test_known_nonzeros(self, figure_coo):
        t = coo_to_dense(figure_coo)
        back = dense_to_coo(t)
        assert back == figure_coo
        assert back.indices.tolist() == [
            [0, 0, 1], [1, 0, 0], [1, 1, 2], [2, 2, 2],
        ]
        assert back.values.tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_all_zero(self):
        c = dense_to_coo(make_dense((4,), ElementType.F64, [0.0] * 4))
        assert c.nnz == 0
        assert coo_to_dense(c) == make_dense((4,), ElementType.F64, [0.0] * 4)

    @pytest.mark.parametrize("seed,shape", [(1, (5,)), (2, (4, 6)), (3, (3, 4, 5)), (4, (2, 3, 4, 3))])
    def test_random_roundtrip(self, seed, shape):
        t = random_dense(seed, shape)
        assert coo_to_dense(dense_to_coo(t)) == t

    def test_sorted_unique(self, figure_coo):
        idx = figure_coo.indices
        assert all(
            tuple(idx[i]) < tuple(idx[i + 1]) for i in range(len(idx) - 1)
        )


class TestCooConstruction:
    def test_explicit_zero_dropped(self):
        c = CooTensor((2, 2), [[0, 0], [1, 1]], [5.0, 0.0])
        assert c.nnz == 1

    def test_unsorted_input_canonicalized(self):
        c = CooTensor((3,), [[2], [0]], [9.0, 8.0])
        assert c.indices.tolist() == [[0], [2]]
        assert c.values.tolist() == [8.0, 9.0]

    def test_duplicate_raises(self):
        with pytest.raises(DuplicateCoordinate):
            CooTensor((3,), [[1], [1]], [1.0, 2.0])

    def test_out_of_bounds(self):
        with pytest.raises(OutOfBounds):
            CooTensor((2, 2), [[0, 2]], [1.0])

    def test_decode_defends_against_tampered_bounds(self):
        bad = CooTensor((4, 4), [[3, 3]], [1.0])
        bad.dense_shape = (2, 2)  # violate the invariant on purpose
        with pytest.raises(OutOfBounds):
            coo_to_dense(bad)


class TestSliceDense:
    def test_1d_window(self):
        t = make_dense((4,), ElementType.F64, [10, 11, 12, 13])
        out = slice_dense(t, SliceSpec(((1, 3),)))
        assert out.data.tolist() == [11.0, 12.0]

    def test_full_identity(self):
        t = random_dense(7, (3, 4, 2))
        assert slice_dense(t, SliceSpec.full(3)) == t

    def test_against_index_arithmetic(self):
        t = random_dense(11, (8, 3, 4, 4))
        spec = SliceSpec(((0, 2), None, None, None))
        resolved = spec.resolve(t.shape)
        oracle_shape, oracle_flat = brute_slice(
            t.data.reshape(-1).tolist(), t.shape, resolved
        )
        got = slice_dense(t, spec)
        assert got.shape == oracle_shape
        assert got.data.reshape(-1).tolist() == oracle_flat

    def test_out_of_range(self):
        t = random_dense(1, (4, 4))
        with pytest.raises(RangeOutOfBounds):
            slice_dense(t, SliceSpec(((0, 5), None)))
        with pytest.raises(RankMismatch):
            slice_dense(t, SliceSpec(((0, 1),)))

    def test_composition(self):
        t = random_dense(13, (6, 5, 4))
        s1 = SliceSpec(((1, 5), None, (0, 3)))
        s2 = SliceSpec(((1, 3), (2, 5), (1, 3)))
        via_steps = slice_dense(slice_dense(t, s1), s2)
        via_compose = slice_dense(t, compose_slices(s1, s2, t.shape))
        assert via_steps == via_compose


class TestSliceCoo:
    def test_matches_dense_path(self, figure_coo):
        spec = SliceSpec(((1, 3), None, (0, 2)))
        sparse_slice = slice_coo(figure_coo, spec)
        dense_slice = slice_dense(coo_to_dense(figure_coo), spec)
        assert coo_to_dense(sparse_slice) == dense_slice


class TestDensityClassify:
    def test_paper_scale_ratio(self):
        shape = (183, 24, 1140, 1717)
        nnz = 3_309_490
        indices = np.column_stack(
            np.unravel_index(np.arange(nnz, dtype=np.int64), shape)
        )
        c = CooTensor(shape, indices, np.ones(nnz))
        assert round(density(c), 6) == 0.000385
        assert classify(c) is TensorClass.SPARSE

    def test_empty_and_full(self):
        empty = CooTensor((2, 2), np.empty((0, 2), dtype=np.int64), [])
        assert density(empty) == 0.0
        full = CooTensor((2, 2), [[0, 0], [0, 1], [1, 0], [1, 1]], [1, 2, 3, 4])
        assert density(full) == 1.0
        assert classify(full) is TensorClass.GENERAL

    def test_boundary_is_general(self):
        c = CooTensor((2, 10), [[0, 0], [1, 0]], [1.0, 1.0])
        assert density(c) == 0.10
        assert classify(c) is TensorClass.GENERAL
        below = CooTensor((2, 10), [[0, 0]], [1.0])
        assert classify(below) is TensorClass.SPARSE


class TestTensorId:
    def test_generate_format(self):
        tid = generate_id("csf", 3)
        prefix, rank, suffix = tid.split("-")
        assert prefix == "csf" and rank == "3d" and len(suffix) == 12
        int(suffix, 16)

    @pytest.mark.parametrize("bad", ["", "a b", "a/b", "a\\b", "x\tz"])
    def test_rejects_bad_ids(self, bad):
        with pytest.raises(BadTensorId):
            check_tensor_id(bad)
