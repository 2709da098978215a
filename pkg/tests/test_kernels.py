import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jitune import CandidateSpace, build_variant
from jitune.kernels import (
    MATMUL_ORDERS,
    BlockedMatmulFactory,
    MatmulOrderFactory,
    SaxpyFactory,
    blocked_matmul,
    chunked_saxpy,
    matmul_order,
    random_matrix,
    saxpy,
    specialize_blocked,
)

from .oracles import naive_matmul


class TestSaxpy:
    def test_zero_scale(self):
        y = np.array([1.0, 2.0, 3.0])
        saxpy(0.0, np.array([5.0, 6.0, 7.0]), y)
        assert y.tolist() == [1.0, 2.0, 3.0]

    def test_small(self):
        y = np.array([2.0, 3.0])
        saxpy(1.0, np.array([1.0, 1.0]), y)
        assert y.tolist() == [3.0, 4.0]

    def test_partial_size(self):
        y = np.array([0.0, 0.0, 0.0])
        saxpy(2.0, np.array([1.0, 1.0, 1.0]), y, size=2)
        assert y.tolist() == [2.0, 2.0, 0.0]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            saxpy(1.0, np.zeros(2), np.zeros(3))

    @settings(max_examples=30, deadline=None)
    @given(a=st.floats(-10, 10), seed=st.integers(0, 1000), n=st.integers(0, 300), chunk=st.integers(1, 64))
    def test_random_against_elementwise(self, a, seed, n, chunk):
        rng = np.random.default_rng(seed)
        x, y = rng.standard_normal(n), rng.standard_normal(n)
        expected = [a * xi + yi for xi, yi in zip(x.tolist(), y.tolist())]
        y1, y2 = y.copy(), y.copy()
        saxpy(a, x, y1)
        chunked_saxpy(chunk, a, x, y2)
        assert y1.tolist() == pytest.approx(expected, rel=1e-12, abs=1e-12)
        assert y2.tolist() == pytest.approx(expected, rel=1e-12, abs=1e-12)


class TestMatmul:
    @pytest.mark.parametrize("order", MATMUL_ORDERS)
    def test_identity(self, order):
        A = random_matrix(7, np.random.default_rng(1))
        assert (matmul_order(order, A, np.eye(7, dtype=np.int64)) == A).all()

    @pytest.mark.parametrize("order", MATMUL_ORDERS)
    def test_hand_product(self, order):
        C = matmul_order(order, [[1, 2], [3, 4]], [[5, 6], [7, 8]], 2)
        assert C.tolist() == [[19, 22], [43, 50]]

    def test_orders_agree(self):
        rng = np.random.default_rng(3)
        A, B = random_matrix(16, rng), random_matrix(16, rng)
        ref = naive_matmul(A.tolist(), B.tolist())
        for order in MATMUL_ORDERS:
            assert matmul_order(order, A, B).tolist() == ref

    def test_bad_order_and_dims(self):
        A = np.zeros((3, 3), dtype=np.int64)
        with pytest.raises(ValueError):
            matmul_order("kji", A, A)
        with pytest.raises(ValueError):
            matmul_order("ijk", A, np.zeros((2, 2), dtype=np.int64))
        with pytest.raises(ValueError):
            blocked_matmul(4, A, A, 4)

    @pytest.mark.parametrize("block", [1, 12, 2, 4, 8, 5, 100])
    def test_blocked_non_divisible(self, block):
        rng = np.random.default_rng(block)
        A, B = random_matrix(12, rng), random_matrix(12, rng)
        assert blocked_matmul(block, A, B).tolist() == naive_matmul(A.tolist(), B.tolist())

    def test_block_must_be_positive(self):
        A = np.zeros((2, 2), dtype=np.int64)
        with pytest.raises(ValueError):
            blocked_matmul(0, A, A)

    def test_specialized_equals_generic(self):
        rng = np.random.default_rng(9)
        A, B = random_matrix(10, rng), random_matrix(10, rng)
        fn = specialize_blocked(3)
        assert (fn(A, B, 10) == blocked_matmul(3, A, B)).all()


class TestFactories:
    @pytest.mark.parametrize("fresh", [False, True])
    def test_order_factory(self, fresh):
        rng = np.random.default_rng(0)
        A, B = random_matrix(9, rng), random_matrix(9, rng)
        f = MatmulOrderFactory(fresh=fresh)
        ref = naive_matmul(A.tolist(), B.tolist())
        for i in range(3):
            v = build_variant(f, f.space(), i)
            assert v.exec((A, B)).tolist() == ref

    @pytest.mark.parametrize("fresh", [False, True])
    def test_block_factory(self, fresh):
        rng = np.random.default_rng(0)
        A, B = random_matrix(11, rng), random_matrix(11, rng)
        space = CandidateSpace.parameter_values([2, 4])
        ref = naive_matmul(A.tolist(), B.tolist())
        for i in range(2):
            assert build_variant(BlockedMatmulFactory(fresh=fresh), space, i).exec((A, B)).tolist() == ref

    def test_jit_build_costs_more_than_closure(self):
        space = CandidateSpace.parameter_values([8])
        closure = build_variant(BlockedMatmulFactory(fresh=False), space, 0)
        jit = build_variant(BlockedMatmulFactory(fresh=True), space, 0)
        assert jit.compile_cost > closure.compile_cost

    @pytest.mark.parametrize("fresh", [False, True])
    def test_saxpy_factory(self, fresh):
        x, y = np.arange(5.0), np.ones(5)
        v = build_variant(SaxpyFactory(fresh=fresh), CandidateSpace.parameter_values([2]), 0)
        assert v.exec((2.0, x, y)).tolist() == [1.0, 3.0, 5.0, 7.0, 9.0]
