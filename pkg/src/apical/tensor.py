"""Dense float64 matrix helpers and the seeded random stream.

Matrices are plain 2-D ``numpy.ndarray`` objects of dtype float64, one sample
per row. Every function here returns a fresh array and never mutates its
arguments.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import DimensionError

Matrix = np.ndarray


def as_matrix(a) -> Matrix:
    m = np.array(a, dtype=np.float64)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(1, -1)
    elif m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got {m.ndim} dimensions")
    return m


def _same_shape(a: Matrix, b: Matrix, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


def matmul(a: Matrix, b: Matrix) -> Matrix:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a @ b


def add_row_broadcast(a: Matrix, bias: Matrix) -> Matrix:
    if bias.ndim != 2 or bias.shape[0] != 1 or bias.shape[1] != a.shape[1]:
        raise DimensionError(f"add_row_broadcast: bias {bias.shape} does not fit {a.shape}")
    return a + bias


def ewise(a: Matrix, f: Callable[[float], float]) -> Matrix:
    """Apply a scalar function to every entry (slow path, for small inputs and tests)."""
    return np.vectorize(f, otypes=[np.float64])(a).reshape(a.shape)


def transpose(a: Matrix) -> Matrix:
    return a.T.copy()


def scale(a: Matrix, k: float) -> Matrix:
    return a * float(k)


def add(a: Matrix, b: Matrix) -> Matrix:
    _same_shape(a, b, "add")
    return a + b


def sub(a: Matrix, b: Matrix) -> Matrix:
    _same_shape(a, b, "sub")
    return a - b


def hadamard(a: Matrix, b: Matrix) -> Matrix:
    _same_shape(a, b, "hadamard")
    return a * b


def row_sum(a: Matrix) -> Matrix:
    """Sum over rows, giving a 1 x cols matrix (the bias-gradient reduction)."""
    return a.sum(axis=0, keepdims=True)


class RngStream:
    """Philox-backed random stream addressed by a seed and a child path.

    Philox is counter based, so a given (seed, path) yields the same draws on
    every platform. ``child(i)`` derives an independent stream, which is how
    trials, initializers and shufflers get disjoint randomness.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path})"

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.path + (index,))

    def uniform(self, low, high, shape) -> Matrix:
        return self._gen.uniform(low, high, size=shape)

    def normal(self, loc, scale, shape) -> np.ndarray:
        return self._gen.normal(loc, scale, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low, high, size=None):
        return self._gen.integers(low, high, size=size)
