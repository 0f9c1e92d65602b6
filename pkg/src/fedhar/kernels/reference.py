"""Pure NumPy convolution kernels (fallback backend).

Array layout is (batch, sensor channel, feature map, time); the
convolution slides over time and mixes feature maps while keeping
sensor channels independent.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import as_strided

BACKEND_NAME = "reference"


def _windowed_view(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    b, c, m, t = x.shape
    t_out = (t - kernel) // stride + 1
    sb, sc, sm, st = x.strides
    return as_strided(
        x,
        shape=(b, c, m, t_out, kernel),
        strides=(sb, sc, sm, st * stride, st),
        writeable=False,
    )


def conv1d_forward(
    x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int
) -> np.ndarray:
    """Valid cross-correlation along time.

    x: (B, C, M_in, T_in), w: (M_out, M_in, K), b: (M_out,)
    returns (B, C, M_out, T_out) with T_out = (T_in - K) // stride + 1.
    """
    xw = _windowed_view(x, w.shape[2], stride)
    # (B, C, T_out, M_out) via BLAS-backed tensordot, then to map-major.
    z = np.tensordot(xw, w, axes=([2, 4], [1, 2]))
    z = np.ascontiguousarray(z.transpose(0, 1, 3, 2))
    z += b[None, None, :, None]
    return z


def conv1d_backward(
    x: np.ndarray, w: np.ndarray, stride: int, dz: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv1d_forward.

    dz: (B, C, M_out, T_out); returns (dx, dw, db) matching x, w, b.
    """
    kernel = w.shape[2]
    t_out = dz.shape[3]
    xw = _windowed_view(x, kernel, stride)
    dw = np.tensordot(dz, xw, axes=([0, 1, 3], [0, 1, 3]))
    db = dz.sum(axis=(0, 1, 3))
    # Scatter dz back through the filters: g[b,c,t,m,k] = sum_f dz*w.
    g = np.tensordot(dz, w, axes=([2], [0]))
    dx = np.zeros_like(x)
    for k in range(kernel):
        dx[:, :, :, k : k + stride * t_out : stride] += g[:, :, :, :, k].transpose(
            0, 1, 3, 2
        )
    return dx, dw, db
