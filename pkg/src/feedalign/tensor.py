"""Minimal dense linear-algebra kernel.

Every numeric value in this package moves through the two types defined
here: a row-major 2-D ``Matrix`` and a 1-D ``Vector``, both 64-bit float.
Ops are pure functions returning fresh values; no input is ever mutated,
and there is no implicit broadcasting -- shape mismatches are rejected.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Matrix",
    "Vector",
    "ShapeError",
    "matmul",
    "transpose",
    "hadamard",
    "outer",
    "axpy_scale",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested op."""


def _as_float64(data, ndim: int) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim != ndim:
        raise ShapeError(f"expected a {ndim}-D array, got shape {arr.shape}")
    return arr


class Matrix:
    """Dense row-major matrix of 64-bit floats with positive dimensions."""

    __slots__ = ("data",)

    def __init__(self, data) -> None:
        arr = _as_float64(data, 2)
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"matrix dimensions must be positive, got {arr.shape}")
        self.data = arr

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Matrix":
        return cls(np.zeros((rows, cols)))

    @classmethod
    def identity(cls, n: int) -> "Matrix":
        return cls(np.eye(n))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def tobytes(self) -> bytes:
        """Row-major little-endian float64 payload."""
        return self.data.astype("<f8", copy=False).tobytes()

    def __repr__(self) -> str:
        return f"Matrix({self.rows}x{self.cols})"


class Vector:
    """Dense vector of 64-bit floats with positive length."""

    __slots__ = ("data",)

    def __init__(self, data) -> None:
        arr = _as_float64(data, 1)
        if arr.shape[0] < 1:
            raise ShapeError("vector length must be positive")
        self.data = arr

    @classmethod
    def zeros(cls, n: int) -> "Vector":
        return cls(np.zeros(n))

    def __len__(self) -> int:
        return self.data.shape[0]

    def tobytes(self) -> bytes:
        return self.data.astype("<f8", copy=False).tobytes()

    def __repr__(self) -> str:
        return f"Vector({len(self)})"


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Standard matrix product; a.cols must equal b.rows."""
    if a.cols != b.rows:
        raise ShapeError(f"cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}")
    return Matrix(a.data @ b.data)


def transpose(a: Matrix) -> Matrix:
    return Matrix(a.data.T)


def hadamard(a, b):
    """Elementwise product of two same-shape matrices or vectors."""
    if type(a) is not type(b):
        raise ShapeError(f"mixed operand types {type(a).__name__} and {type(b).__name__}")
    if a.data.shape != b.data.shape:
        raise ShapeError(f"shape mismatch {a.data.shape} vs {b.data.shape}")
    return type(a)(a.data * b.data)


def outer(u: Vector, v: Vector) -> Matrix:
    """Outer product: (len(u) x len(v)) matrix with entries u_i * v_j."""
    return Matrix(np.outer(u.data, v.data))


def axpy_scale(accumulator, addend, scale: float):
    """accumulator + scale * addend, elementwise, for same-shape operands."""
    if type(accumulator) is not type(addend):
        raise ShapeError(
            f"mixed operand types {type(accumulator).__name__} and {type(addend).__name__}"
        )
    if accumulator.data.shape != addend.data.shape:
        raise ShapeError(f"shape mismatch {accumulator.data.shape} vs {addend.data.shape}")
    return type(accumulator)(accumulator.data + scale * addend.data)
