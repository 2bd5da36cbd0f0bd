"""Orthonormal 2-D DCT and 1-D Haar transforms for collaborative filtering.

Both transforms are exactly orthonormal, so Parseval holds and squared
distances are preserved: block matching can run in the transform domain.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=8)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis: row k is c_k cos(pi (2j+1) k / 2n)."""
    if n < 1:
        raise ValueError("transform size must be >= 1")
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    mat = np.cos(np.pi * (2 * j + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
    mat[0] = math.sqrt(1.0 / n)
    return mat


def dct2(block: np.ndarray) -> np.ndarray:
    """2-D orthonormal DCT of square block(s); batched over leading axes."""
    block = np.asarray(block, dtype=np.float64)
    n = block.shape[-1]
    if block.shape[-2] != n:
        raise ValueError("blocks must be square")
    t = dct_matrix(n)
    return t @ block @ t.T


def idct2(coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    n = coeffs.shape[-1]
    if coeffs.shape[-2] != n:
        raise ValueError("blocks must be square")
    t = dct_matrix(n)
    return t.T @ coeffs @ t


def haar1(stack: np.ndarray) -> np.ndarray:
    """Full orthonormal Haar decomposition along axis 0 (power-of-two length).

    Output packing: [overall average, coarse details, ..., finest details];
    a constant stack of value v maps to v * sqrt(len) in slot 0.
    """
    stack = np.asarray(stack, dtype=np.float64)
    n = stack.shape[0]
    if n < 1 or n & (n - 1):
        raise ValueError(f"stack length {n} is not a power of two")
    out = stack.copy()
    m = n
    root2 = math.sqrt(2.0)
    while m > 1:
        half = m // 2
        even = out[0:m:2].copy()
        odd = out[1:m:2].copy()
        out[:half] = (even + odd) / root2
        out[half:m] = (even - odd) / root2
        m = half
    return out


def ihaar1(coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    n = coeffs.shape[0]
    if n < 1 or n & (n - 1):
        raise ValueError(f"stack length {n} is not a power of two")
    out = coeffs.copy()
    m = 2
    root2 = math.sqrt(2.0)
    while m <= n:
        half = m // 2
        avg = out[:half].copy()
        diff = out[half:m].copy()
        out[0:m:2] = (avg + diff) / root2
        out[1:m:2] = (avg - diff) / root2
        m *= 2
    return out
