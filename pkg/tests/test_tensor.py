import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedalign.tensor import (
    Matrix,
    ShapeError,
    Vector,
    axpy_scale,
    hadamard,
    matmul,
    outer,
    transpose,
)


def small_matrices(max_dim=5):
    dims = st.integers(min_value=1, max_value=max_dim)
    values = st.floats(min_value=-10, max_value=10, allow_nan=False, width=64)

    @st.composite
    def build(draw):
        rows, cols = draw(dims), draw(dims)
        data = draw(
            st.lists(
                st.lists(values, min_size=cols, max_size=cols),
                min_size=rows,
                max_size=rows,
            )
        )
        return Matrix(data)

    return build()


class TestConstruction:
    def test_matrix_stores_float64_row_major(self):
        m = Matrix([[1, 2], [3, 4]])
        assert m.data.dtype == np.float64
        assert m.data.flags["C_CONTIGUOUS"]
        assert m.shape == (2, 2)
        assert (m.rows, m.cols) == (2, 2)

    def test_vector_length(self):
        assert len(Vector([1.0, 2.0, 3.0])) == 3

    def test_zero_size_rejected(self):
        with pytest.raises(ShapeError):
            Matrix(np.empty((0, 3)))
        with pytest.raises(ShapeError):
            Vector(np.empty(0))

    def test_wrong_rank_rejected(self):
        with pytest.raises(ShapeError):
            Matrix([1.0, 2.0])
        with pytest.raises(ShapeError):
            Vector([[1.0], [2.0]])

    def test_factories(self):
        assert np.all(Matrix.zeros(2, 3).data == 0.0)
        np.testing.assert_array_equal(Matrix.identity(3).data, np.eye(3))
        assert np.all(Vector.zeros(4).data == 0.0)

    def test_tobytes_little_endian(self):
        assert Vector([1.0]).tobytes() == np.float64(1.0).astype("<f8").tobytes()


class TestMatmul:
    def test_identity(self):
        result = matmul(Matrix.identity(2), Matrix([[3.0], [4.0]]))
        np.testing.assert_array_equal(result.data, [[3.0], [4.0]])

    def test_all_ones(self):
        result = matmul(Matrix([[1, 1], [1, 1]]), Matrix([[1], [1]]))
        np.testing.assert_array_equal(result.data, [[2.0], [2.0]])

    def test_zero_matrix(self):
        result = matmul(Matrix.zeros(2, 2), Matrix([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))
        assert np.all(result.data == 0.0)
        assert result.shape == (2, 3)

    def test_mismatch_reports_both_shapes(self):
        with pytest.raises(ShapeError, match="2x3.*4x2"):
            matmul(Matrix.zeros(2, 3), Matrix.zeros(4, 2))

    @settings(max_examples=60)
    @given(small_matrices(), small_matrices(), small_matrices())
    def test_associativity(self, a, b, c):
        if a.cols != b.rows or b.cols != c.rows:
            return
        left = matmul(matmul(a, b), c).data
        right = matmul(a, matmul(b, c)).data
        scale = max(np.abs(left).max(), np.abs(right).max(), 1.0)
        assert np.abs(left - right).max() <= 1e-9 * scale

    @settings(max_examples=60)
    @given(small_matrices(), small_matrices())
    def test_transpose_of_product(self, a, b):
        if a.cols != b.rows:
            return
        left = transpose(matmul(a, b)).data
        right = matmul(transpose(b), transpose(a)).data
        np.testing.assert_allclose(left, right, atol=1e-12)


class TestTranspose:
    def test_definitional(self):
        np.testing.assert_array_equal(
            transpose(Matrix([[1, 2], [3, 4]])).data, [[1.0, 3.0], [2.0, 4.0]]
        )

    @settings(max_examples=40)
    @given(small_matrices())
    def test_involution(self, a):
        np.testing.assert_array_equal(transpose(transpose(a)).data, a.data)

    def test_symmetric_fixed_point(self):
        s = Matrix([[1, 7], [7, 2]])
        np.testing.assert_array_equal(transpose(s).data, s.data)


class TestHadamard:
    def test_ones_identity(self):
        a = Matrix([[1.5, -2.0], [0.0, 3.0]])
        np.testing.assert_array_equal(hadamard(a, Matrix(np.ones((2, 2)))).data, a.data)

    def test_zeros(self):
        a = Vector([1.0, -2.0, 3.0])
        assert np.all(hadamard(a, Vector.zeros(3)).data == 0.0)

    def test_definitional(self):
        result = hadamard(Vector([1.0, -2.0]), Vector([-3.0, 0.5]))
        np.testing.assert_array_equal(result.data, [-3.0, -1.0])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            hadamard(Matrix.zeros(2, 2), Matrix.zeros(2, 3))

    def test_mixed_types_rejected(self):
        with pytest.raises(ShapeError):
            hadamard(Matrix([[1.0]]), Vector([1.0]))


class TestOuter:
    def test_row_case(self):
        np.testing.assert_array_equal(
            outer(Vector([1.0]), Vector([1.0, 2.0, 3.0])).data, [[1.0, 2.0, 3.0]]
        )

    def test_zero_vector(self):
        assert np.all(outer(Vector.zeros(2), Vector([1.0, -1.0])).data == 0.0)

    def test_definitional(self):
        result = outer(Vector([2.0, 3.0]), Vector([1.0, -1.0]))
        np.testing.assert_array_equal(result.data, [[2.0, -2.0], [3.0, -3.0]])


class TestAxpyScale:
    def test_zero_scale(self):
        acc = Matrix([[1.0, 2.0]])
        result = axpy_scale(acc, Matrix([[9.0, 9.0]]), 0.0)
        np.testing.assert_array_equal(result.data, acc.data)

    def test_zero_accumulator_unit_scale(self):
        addend = Matrix([[5.0], [6.0]])
        result = axpy_scale(Matrix.zeros(2, 1), addend, 1.0)
        np.testing.assert_array_equal(result.data, addend.data)

    def test_definitional(self):
        result = axpy_scale(Matrix([[1.0]]), Matrix([[3.0]]), 2.0)
        np.testing.assert_array_equal(result.data, [[7.0]])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            axpy_scale(Vector.zeros(2), Vector.zeros(3), 1.0)


class TestPurity:
    def test_ops_never_mutate_inputs(self):
        a = Matrix([[1.0, 2.0], [3.0, 4.0]])
        b = Matrix([[1.0, 0.0], [0.0, 1.0]])
        u = Vector([1.0, 2.0])
        before = (a.data.copy(), b.data.copy(), u.data.copy())
        matmul(a, b)
        transpose(a)
        hadamard(a, b)
        outer(u, u)
        axpy_scale(a, b, 2.5)
        np.testing.assert_array_equal(a.data, before[0])
        np.testing.assert_array_equal(b.data, before[1])
        np.testing.assert_array_equal(u.data, before[2])
