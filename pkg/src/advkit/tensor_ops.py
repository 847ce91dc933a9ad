"""Minimal dense tensor conventions and elementwise/reduction helpers.

A "tensor" throughout the package is a C-contiguous float32 numpy array.
At-rest data (weights, images, perturbations) stays float32; reductions
accumulate in float64 and round back, which keeps summation error bounded
without giving up the 32-bit storage convention.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from advkit.errors import ShapeError

DTYPE = np.float32


def as_tensor(data, shape: Sequence[int] | None = None) -> np.ndarray:
    """Coerce ``data`` to a float32 tensor, optionally reshaped, and validate it."""
    t = np.ascontiguousarray(data, dtype=DTYPE)
    if shape is not None:
        if t.size != int(np.prod(shape)):
            raise ShapeError(f"cannot view {t.size} scalars as shape {tuple(shape)}")
        t = t.reshape(shape)
    if not np.all(np.isfinite(t)):
        raise ShapeError("tensor contains NaN or Inf")
    return t


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def add(a: np.ndarray, b: np.ndarray | float) -> np.ndarray:
    if isinstance(b, np.ndarray):
        _check_same_shape(a, b)
    return as_tensor(np.add(a, b, dtype=DTYPE))


def sub(a: np.ndarray, b: np.ndarray | float) -> np.ndarray:
    if isinstance(b, np.ndarray):
        _check_same_shape(a, b)
    return as_tensor(np.subtract(a, b, dtype=DTYPE))


def mul_scalar(a: np.ndarray, s: float) -> np.ndarray:
    return as_tensor(np.multiply(a, DTYPE(s), dtype=DTYPE))


def clamp(a: np.ndarray, lo: float, hi: float) -> np.ndarray:
    if lo > hi:
        raise ShapeError(f"clamp bounds out of order: [{lo}, {hi}]")
    return as_tensor(np.clip(a, lo, hi))


def reduce_sum(a: np.ndarray) -> float:
    if a.size == 0:
        raise ShapeError("reduction over empty tensor")
    return float(DTYPE(np.sum(a, dtype=np.float64)))


def reduce_mean(a: np.ndarray) -> float:
    if a.size == 0:
        raise ShapeError("reduction over empty tensor")
    return float(DTYPE(np.mean(a, dtype=np.float64)))


def reduce_max(a: np.ndarray) -> float:
    if a.size == 0:
        raise ShapeError("reduction over empty tensor")
    return float(np.max(a))


def argmax(a: np.ndarray) -> int:
    """Index of the largest element in flat row-major order; ties go to the lowest index."""
    if a.size == 0:
        raise ShapeError("argmax of empty tensor")
    return int(np.argmax(a))
