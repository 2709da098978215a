"""Reference kernels: saxpy, loop-order matmul, tiled matmul.

Matrices are square ``int64`` C-contiguous arrays. The loop nests are compiled
with numba; ``specialize_*`` build a fresh compiled function with the tuning
parameter frozen in as a constant, which is what the ``jit`` factory uses.
"""

from __future__ import annotations

import functools
from typing import Any, Callable

import numba
import numpy as np
from numba import types

from .tuning import CandidateSpace

MATMUL_ORDERS = ("ijk", "ikj", "jik")
DEFAULT_BLOCK_SIZES = (4, 8, 16, 32, 64, 128, 256, 512)
DEFAULT_SAXPY_CHUNKS = (16, 64, 256, 1024, 4096)

_MAT = types.Array(types.int64, 2, "C")
_VEC = types.Array(types.float64, 1, "C")
_MATMUL_SIG = _MAT(_MAT, _MAT, types.int64)
_BLOCKED_SIG = _MAT(_MAT, _MAT, types.int64, types.int64)
_SAXPY_SIG = types.void(types.float64, _VEC, _VEC, types.int64, types.int64)


# -- loop nests (plain python; compiled below) ------------------------------


def _matmul_ijk(A, B, n):
    C = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            s = 0
            for k in range(n):
                s += A[i, k] * B[k, j]
            C[i, j] = s
    return C


def _matmul_ikj(A, B, n):
    C = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for k in range(n):
            a = A[i, k]
            for j in range(n):
                C[i, j] += a * B[k, j]
    return C


def _matmul_jik(A, B, n):
    C = np.zeros((n, n), dtype=np.int64)
    for j in range(n):
        for i in range(n):
            s = 0
            for k in range(n):
                s += A[i, k] * B[k, j]
            C[i, j] = s
    return C


def _blocked(A, B, n, bs):
    C = np.zeros((n, n), dtype=np.int64)
    for i in range(0, n, bs):
        for k in range(0, n, bs):
            for j in range(0, n, bs):
                for ii in range(i, min(i + bs, n)):
                    for kk in range(k, min(k + bs, n)):
                        a = A[ii, kk]
                        for jj in range(j, min(j + bs, n)):
                            C[ii, jj] += a * B[kk, jj]
    return C


def _saxpy_chunked(a, x, y, size, chunk):
    for i in range(0, size, chunk):
        for j in range(i, min(size, i + chunk)):
            y[j] = a * x[j] + y[j]


_ORDER_SOURCES: dict[str, Callable] = {"ijk": _matmul_ijk, "ikj": _matmul_ikj, "jik": _matmul_jik}


@functools.cache
def _compiled_order(order: str):
    return numba.njit(_MATMUL_SIG)(_ORDER_SOURCES[order])


@functools.cache
def _compiled_blocked():
    return numba.njit(_BLOCKED_SIG)(_blocked)


@functools.cache
def _compiled_saxpy():
    return numba.njit(_SAXPY_SIG)(_saxpy_chunked)


def warm_up() -> None:
    """Compile the generic kernels now so no later timing includes it."""
    for order in MATMUL_ORDERS:
        _compiled_order(order)
    _compiled_blocked()
    _compiled_saxpy()


# -- public kernels ---------------------------------------------------------


def as_matrix(M: Any) -> np.ndarray:
    return np.ascontiguousarray(M, dtype=np.int64)


def _check_square(A: np.ndarray, B: np.ndarray, n: int | None) -> int:
    if A.ndim != 2 or B.ndim != 2:
        raise ValueError("matrices must be 2-D")
    if n is None:
        n = A.shape[0]
    if n < 1 or A.shape != (n, n) or B.shape != (n, n):
        raise ValueError(f"expected two {n}x{n} matrices, got {A.shape} and {B.shape}")
    return n


def saxpy(a: float, x: np.ndarray, y: np.ndarray, size: int | None = None) -> np.ndarray:
    """``y[i] = a*x[i] + y[i]`` for ``i < size``, in place."""
    if size is None:
        size = len(y)
    if size < 0 or len(x) < size or len(y) < size:
        raise ValueError(f"vectors of length {len(x)} and {len(y)} are shorter than size={size}")
    y[:size] = a * x[:size] + y[:size]
    return y


def chunked_saxpy(chunk: int, a: float, x: np.ndarray, y: np.ndarray, size: int | None = None) -> np.ndarray:
    """saxpy traversed in ``chunk``-sized strips (numba)."""
    if size is None:
        size = len(y)
    if chunk < 1:
        raise ValueError("chunk must be >= 1")
    if len(x) < size or len(y) < size:
        raise ValueError("vectors shorter than size")
    _compiled_saxpy()(float(a), x, y, size, chunk)
    return y


def matmul_order(order: str, A: np.ndarray, B: np.ndarray, n: int | None = None) -> np.ndarray:
    if order not in _ORDER_SOURCES:
        raise ValueError(f"unknown loop order {order!r}; choose from {MATMUL_ORDERS}")
    A, B = as_matrix(A), as_matrix(B)
    n = _check_square(A, B, n)
    return _compiled_order(order)(A, B, n)


def blocked_matmul(block: int, A: np.ndarray, B: np.ndarray, n: int | None = None) -> np.ndarray:
    if block < 1:
        raise ValueError("block size must be >= 1")
    A, B = as_matrix(A), as_matrix(B)
    n = _check_square(A, B, n)
    return _compiled_blocked()(A, B, n, block)


def random_matrix(n: int, rng: np.random.Generator, high: int = 10) -> np.ndarray:
    return rng.integers(0, high, size=(n, n), dtype=np.int64)


# -- fresh specializations --------------------------------------------------


def specialize_order(order: str):
    """A newly compiled copy of one loop order (real compile work every call)."""
    return numba.njit(_MATMUL_SIG)(_ORDER_SOURCES[order])


def specialize_blocked(block: int):
    """A newly compiled tiled matmul with ``block`` baked in as a constant."""
    if block < 1:
        raise ValueError("block size must be >= 1")
    bs = int(block)

    def tiled(A, B, n):
        C = np.zeros((n, n), dtype=np.int64)
        for i in range(0, n, bs):
            for k in range(0, n, bs):
                for j in range(0, n, bs):
                    for ii in range(i, min(i + bs, n)):
                        for kk in range(k, min(k + bs, n)):
                            a = A[ii, kk]
                            for jj in range(j, min(j + bs, n)):
                                C[ii, jj] += a * B[kk, jj]
        return C

    return numba.njit(_MATMUL_SIG)(tiled)


def specialize_saxpy(chunk: int):
    if chunk < 1:
        raise ValueError("chunk must be >= 1")
    cs = int(chunk)

    def strip(a, x, y, size):
        for i in range(0, size, cs):
            for j in range(i, min(size, i + cs)):
                y[j] = a * x[j] + y[j]

    return numba.njit(types.void(types.float64, _VEC, _VEC, types.int64))(strip)


# -- factories --------------------------------------------------------------
# Payloads: matmul -> (A, B) as int64 C-contiguous; saxpy -> (a, x, y).


class MatmulOrderFactory:
    """Implementation choice among ``MATMUL_ORDERS``.

    ``fresh=False`` binds the shared compiled kernel (near-zero build cost);
    ``fresh=True`` compiles a new copy on every build.
    """

    def __init__(self, fresh: bool = False, orders: tuple[str, ...] = MATMUL_ORDERS) -> None:
        self.fresh = fresh
        self.orders = orders
        if not fresh:
            for o in orders:
                _compiled_order(o)

    def space(self) -> CandidateSpace:
        return CandidateSpace.implementations(len(self.orders))

    def build(self, space: CandidateSpace, index: int):
        order = self.orders[space.candidate(index)]
        fn = specialize_order(order) if self.fresh else _compiled_order(order)

        def run(payload):
            A, B = payload
            return fn(A, B, A.shape[0])

        return run


class BlockedMatmulFactory:
    def __init__(self, fresh: bool = False) -> None:
        self.fresh = fresh
        if not fresh:
            _compiled_blocked()

    def build(self, space: CandidateSpace, index: int):
        block = space.candidate(index)
        if self.fresh:
            fn = specialize_blocked(block)

            def run(payload):
                A, B = payload
                return fn(A, B, A.shape[0])

        else:
            generic = _compiled_blocked()

            def run(payload):
                A, B = payload
                return generic(A, B, A.shape[0], block)

        return run


class SaxpyFactory:
    def __init__(self, fresh: bool = False) -> None:
        self.fresh = fresh
        if not fresh:
            _compiled_saxpy()

    def build(self, space: CandidateSpace, index: int):
        chunk = space.candidate(index)
        if self.fresh:
            fn = specialize_saxpy(chunk)

            def run(payload):
                a, x, y = payload
                fn(a, x, y, len(y))
                return y

        else:
            generic = _compiled_saxpy()

            def run(payload):
                a, x, y = payload
                generic(a, x, y, len(y), chunk)
                return y

        return run
