"""Numba-jitted twins of the numpy kernels.

Same signatures and same math as ``numpy_ops``; plain serial loops, so
every accumulation has a fixed order and repeated runs are bit-identical.
Compiled lazily on first call and cached on disk.
"""

import numpy as np
from numba import njit

BACKEND_NAME = "numba"


@njit(cache=True)
def conv2d_forward(x, w, b, padding, stride):
    N, Ci, H, W = x.shape
    Co, _, kh, kw = w.shape
    Ho = (H + 2 * padding - kh) // stride + 1
    Wo = (W + 2 * padding - kw) // stride + 1
    y = np.empty((N, Co, Ho, Wo), dtype=np.float64)
    for n in range(N):
        for o in range(Co):
            for oy in range(Ho):
                for ox in range(Wo):
                    acc = b[o]
                    iy0 = oy * stride - padding
                    ix0 = ox * stride - padding
                    for c in range(Ci):
                        for i in range(kh):
                            yy = iy0 + i
                            if yy < 0 or yy >= H:
                                continue
                            for j in range(kw):
                                xx = ix0 + j
                                if 0 <= xx < W:
                                    acc += x[n, c, yy, xx] * w[o, c, i, j]
                    y[n, o, oy, ox] = acc
    return y


@njit(cache=True)
def conv2d_backward(x, w, dy, padding, stride):
    N, Ci, H, W = x.shape
    Co, _, kh, kw = w.shape
    Ho, Wo = dy.shape[2], dy.shape[3]
    dx = np.zeros((N, Ci, H, W), dtype=np.float64)
    dw = np.zeros((Co, Ci, kh, kw), dtype=np.float64)
    db = np.zeros(Co, dtype=np.float64)
    for n in range(N):
        for o in range(Co):
            for oy in range(Ho):
                for ox in range(Wo):
                    g = dy[n, o, oy, ox]
                    db[o] += g
                    iy0 = oy * stride - padding
                    ix0 = ox * stride - padding
                    for c in range(Ci):
                        for i in range(kh):
                            yy = iy0 + i
                            if yy < 0 or yy >= H:
                                continue
                            for j in range(kw):
                                xx = ix0 + j
                                if 0 <= xx < W:
                                    dw[o, c, i, j] += g * x[n, c, yy, xx]
                                    dx[n, c, yy, xx] += g * w[o, c, i, j]
    return dx, dw, db


@njit(cache=True)
def maxpool2_forward(x):
    N, C, H, W = x.shape
    H2 = H // 2
    W2 = W // 2
    y = np.empty((N, C, H2, W2), dtype=np.float64)
    arg = np.empty((N, C, H2, W2), dtype=np.int64)
    for n in range(N):
        for c in range(C):
            for oy in range(H2):
                for ox in range(W2):
                    best = x[n, c, 2 * oy, 2 * ox]
                    pos = 0
                    k = 0
                    for di in range(2):
                        for dj in range(2):
                            v = x[n, c, 2 * oy + di, 2 * ox + dj]
                            if v > best:
                                best = v
                                pos = k
                            k += 1
                    y[n, c, oy, ox] = best
                    arg[n, c, oy, ox] = pos
    return y, arg


@njit(cache=True)
def maxpool2_backward(dy, arg, H, W):
    N, C, H2, W2 = dy.shape
    dx = np.zeros((N, C, H, W), dtype=np.float64)
    for n in range(N):
        for c in range(C):
            for oy in range(H2):
                for ox in range(W2):
                    pos = arg[n, c, oy, ox]
                    di = pos // 2
                    dj = pos % 2
                    dx[n, c, 2 * oy + di, 2 * ox + dj] += dy[n, c, oy, ox]
    return dx


@njit(cache=True)
def hard_bin_counts(w, lo, hi, nbins):
    width = (hi - lo) / nbins
    counts = np.zeros(nbins, dtype=np.float64)
    for k in range(w.shape[0]):
        idx = int(np.floor((w[k] - lo) / width))
        if idx < 0:
            idx = 0
        elif idx > nbins - 1:
            idx = nbins - 1
        counts[idx] += 1.0
    return counts


@njit(cache=True)
def soft_bin_counts(w, lo, hi, nbins):
    width = (hi - lo) / nbins
    counts = np.zeros(nbins, dtype=np.float64)
    for k in range(w.shape[0]):
        t = (w[k] - lo) / width - 0.5
        if t < 0.0:
            t = 0.0
        elif t > nbins - 1.0:
            t = nbins - 1.0
        i0 = int(np.floor(t))
        if i0 > nbins - 2:
            i0 = nbins - 2
        frac = t - i0
        counts[i0] += 1.0 - frac
        counts[i0 + 1] += frac
    return counts


@njit(cache=True)
def soft_bin_grad(w, lo, hi, nbins, d_rho, total):
    width = (hi - lo) / nbins
    out = np.zeros_like(w)
    for k in range(w.shape[0]):
        t = (w[k] - lo) / width - 0.5
        if t >= 0.0 and t < nbins - 1:
            i0 = int(np.floor(t))
            out[k] = (d_rho[i0 + 1] - d_rho[i0]) / (total * width)
    return out
