"""Vectorized numpy implementations of the hot kernels.

This is the fallback backend (``DFREG_BACKEND=numpy``). Convolutions go
through sliding windows + BLAS tensordot; binning goes through bincount,
which accumulates in input order and therefore matches the loop order of
the numba backend bit-for-bit. Convolution results can differ from the
numba backend in the last few ulps because BLAS sums in a different
order; each backend on its own is fully deterministic.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BACKEND_NAME = "numpy"


def _pad2d(x, padding):
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def conv2d_forward(x, w, b, padding, stride):
    """Cross-correlation of x[N,Ci,H,W] with w[Co,Ci,kh,kw] plus bias."""
    kh, kw = w.shape[2], w.shape[3]
    xp = _pad2d(x, padding)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    y = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # (N,Ho,Wo,Co)
    y = np.ascontiguousarray(y.transpose(0, 3, 1, 2))
    y += b[None, :, None, None]
    return y


def conv2d_backward(x, w, dy, padding, stride):
    """Gradients (dx, dw, db) of conv2d_forward for upstream dy[N,Co,Ho,Wo]."""
    N, Ci, H, W = x.shape
    Co, _, kh, kw = w.shape
    Ho, Wo = dy.shape[2], dy.shape[3]

    xp = _pad2d(x, padding)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]

    db = dy.sum(axis=(0, 2, 3))
    dw = np.tensordot(dy, win, axes=([0, 2, 3], [0, 2, 3]))  # (Co,Ci,kh,kw)

    dxp = np.zeros_like(xp)
    for i in range(kh):
        for j in range(kw):
            contrib = np.tensordot(dy, w[:, :, i, j], axes=([1], [0]))  # (N,Ho,Wo,Ci)
            dxp[:, :, i : i + stride * Ho : stride, j : j + stride * Wo : stride] += (
                contrib.transpose(0, 3, 1, 2)
            )
    if padding:
        dx = np.ascontiguousarray(dxp[:, :, padding : padding + H, padding : padding + W])
    else:
        dx = dxp
    return dx, np.ascontiguousarray(dw), db


def maxpool2_forward(x):
    """2x2/stride-2 max pool. Returns (y, arg) with arg in 0..3, row-major
    window order, first maximum wins ties."""
    N, C, H, W = x.shape
    win = x.reshape(N, C, H // 2, 2, W // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(N, C, H // 2, W // 2, 4)
    arg = win.argmax(axis=-1)
    y = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(y), arg


def maxpool2_backward(dy, arg, H, W):
    """Route dy back to the argmax positions recorded by the forward pass."""
    N, C, H2, W2 = dy.shape
    z = np.zeros((N, C, H2, W2, 4))
    np.put_along_axis(z, arg[..., None], dy[..., None], axis=-1)
    dx = z.reshape(N, C, H2, W2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(N, C, H, W)
    return np.ascontiguousarray(dx)


def hard_bin_counts(w, lo, hi, nbins):
    """Per-bin unit counts. Edge values go to the right bin except the final
    edge; out-of-range values clamp into the outer bins."""
    width = (hi - lo) / nbins
    idx = np.floor((w - lo) / width).astype(np.int64)
    np.clip(idx, 0, nbins - 1, out=idx)
    return np.bincount(idx, minlength=nbins).astype(np.float64)


def soft_bin_counts(w, lo, hi, nbins):
    """Triangular-kernel fractional counts: each weight splits unit mass
    linearly between the two bins whose centers bracket it; beyond the
    outermost centers the nearest edge bin receives the full unit."""
    width = (hi - lo) / nbins
    t = (w - lo) / width - 0.5
    t = np.clip(t, 0.0, float(nbins - 1))
    i0 = np.floor(t).astype(np.int64)
    np.clip(i0, 0, nbins - 2, out=i0)
    frac = t - i0
    # Interleave the two contributions per weight so bincount accumulates in
    # the same order as the numba loop (bit-identical counts across backends).
    idx = np.empty(2 * w.shape[0], dtype=np.int64)
    wts = np.empty(2 * w.shape[0])
    idx[0::2] = i0
    idx[1::2] = i0 + 1
    wts[0::2] = 1.0 - frac
    wts[1::2] = frac
    return np.bincount(idx, weights=wts, minlength=nbins)


def soft_bin_grad(w, lo, hi, nbins, d_rho, total):
    """d(loss)/d(weight) given d(loss)/d(rho) under soft binning.

    Between adjacent centers the split is linear in w, so the chain rule is
    (d_rho[i+1]-d_rho[i])/(total*width); outside the outermost centers the
    mass assignment is constant and the derivative is zero. At a kink the
    right-hand derivative is used.
    """
    width = (hi - lo) / nbins
    t = (w - lo) / width - 0.5
    out = np.zeros_like(w)
    interior = (t >= 0.0) & (t < nbins - 1)
    i0 = np.floor(t[interior]).astype(np.int64)
    out[interior] = (d_rho[i0 + 1] - d_rho[i0]) / (total * width)
    return out
