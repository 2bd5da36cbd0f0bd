"""Array primitives for the noise-prediction network.

Parameters are stored float32 (so checkpoints round-trip bit-exactly) but
all arithmetic here runs in float64: central finite differences at delta =
1e-3 need the extra headroom to certify gradients to 1e-3 relative error.
Convolutions go through im2col + BLAS matmul in both forward and backward.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv2d_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1):
    """3x3 same-padding convolution; returns (y, cache).

    x is (B, C, H, W); w is (O, C, 3, 3).  stride 2 halves the spatial size
    (inputs must have even extent in that case).
    """
    B, C, H, W = x.shape
    O, C2, KH, KW = w.shape
    if C2 != C:
        raise ValueError(f"weight expects {C2} channels, input has {C}")
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (KH, KW), axis=(2, 3))[:, :, ::stride, ::stride]
    OH, OW = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(B * OH * OW, C * KH * KW)
    y = cols @ w.reshape(O, -1).T + b
    y = y.reshape(B, OH * OW, O).transpose(0, 2, 1).reshape(B, O, OH, OW)
    return y, (x, w, stride)


def conv2d_bwd(dy: np.ndarray, cache):
    """Gradients of conv2d_fwd; returns (dx, dw, db)."""
    x, w, stride = cache
    B, C, H, W = x.shape
    O, _, KH, KW = w.shape
    _, _, OH, OW = dy.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = sliding_window_view(xp, (KH, KW), axis=(2, 3))[:, :, ::stride, ::stride]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(B * OH * OW, C * KH * KW)
    dy_mat = dy.reshape(B, O, OH * OW).transpose(0, 2, 1).reshape(B * OH * OW, O)
    dw = (dy_mat.T @ cols).reshape(w.shape)
    db = dy.sum(axis=(0, 2, 3))
    dcols = (dy_mat @ w.reshape(O, -1)).reshape(B, OH, OW, C, KH, KW)
    dxp = np.zeros((B, C, H + 2, W + 2))
    for ky in range(KH):
        for kx in range(KW):
            dxp[:, :, ky:ky + stride * OH:stride,
                kx:kx + stride * OW:stride] += dcols[:, :, :, :, ky, kx].transpose(0, 3, 1, 2)
    return dxp[:, :, 1:-1, 1:-1], dw, db


def silu_fwd(x: np.ndarray):
    s = 1.0 / (1.0 + np.exp(-x))
    return x * s, x


def silu_bwd(dy: np.ndarray, x: np.ndarray):
    s = 1.0 / (1.0 + np.exp(-x))
    return dy * s * (1.0 + x * (1.0 - s))


def upsample2_fwd(x: np.ndarray):
    """Nearest-neighbor 2x upsampling."""
    return x.repeat(2, axis=2).repeat(2, axis=3)


def upsample2_bwd(dy: np.ndarray):
    B, C, H2, W2 = dy.shape
    return dy.reshape(B, C, H2 // 2, 2, W2 // 2, 2).sum(axis=(3, 5))


def mse_loss(eps_hat: np.ndarray, eps: np.ndarray):
    """Mean squared error and its gradient wrt the prediction."""
    if eps_hat.shape != eps.shape:
        raise ValueError(f"shape mismatch: {eps_hat.shape} vs {eps.shape}")
    diff = eps_hat.astype(np.float64) - eps.astype(np.float64)
    loss = float(np.mean(diff * diff))
    return loss, 2.0 * diff / diff.size


def l1_eval(eps_hat: np.ndarray, eps: np.ndarray) -> float:
    """Mean absolute error (evaluation only, no gradient)."""
    if eps_hat.shape != eps.shape:
        raise ValueError(f"shape mismatch: {eps_hat.shape} vs {eps.shape}")
    return float(np.mean(np.abs(eps_hat.astype(np.float64) - eps)))
