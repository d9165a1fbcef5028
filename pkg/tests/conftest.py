from __future__ import annotations

import numpy as np
import pytest

from dtstore import CooTensor, DenseTensor, ElementType, GenSpec, gen_sparse


@pytest.fixture
def figure_coo() -> CooTensor:
    """The 3x3x3 tensor with four nonzeros used throughout the docs."""
    return CooTensor(
        (3, 3, 3),
        np.array([[0, 0, 1], [1, 0, 0], [1, 1, 2], [2, 2, 2]]),
        np.array([1.0, 2.0, 3.0, 4.0]),
    )


@pytest.fixture
def block_demo_coo() -> CooTensor:
    """The 3x4x2 tensor whose 2x1 blocking yields four block rows."""
    return CooTensor(
        (3, 4, 2),
        np.array(
            [[0, 0, 0], [0, 1, 0], [0, 0, 1], [1, 2, 0], [1, 3, 0], [2, 0, 1], [2, 1, 1]]
        ),
        np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]),
    )


def random_coo(seed: int, shape, density: float = 0.2) -> CooTensor:
    return gen_sparse(GenSpec(shape=tuple(shape), density=density, seed=seed))


def random_dense(seed: int, shape, dtype=ElementType.F64) -> DenseTensor:
    rng = np.random.default_rng(seed)
    if dtype is ElementType.U8:
        data = rng.integers(0, 256, size=shape, dtype=np.uint8)
    else:
        data = rng.normal(size=shape).astype(dtype.np_dtype)
    return DenseTensor(tuple(shape), dtype, data)
