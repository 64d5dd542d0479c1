"""Backend equivalence and contracts of the hot numeric kernels."""

import os
import subprocess
import sys

import numpy as np
import pytest

from dfreg import kernels
from dfreg.kernels import numba_ops, numpy_ops
from dfreg.rng import make_rng


def test_active_backend_is_known():
    assert kernels.BACKEND in ("numpy", "numba")


def _conv_oracle(x, w, b, padding, stride):
    # Literal quadruple loop over the cross-correlation definition.
    n, ci, hh, ww = x.shape
    co, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (hh + 2 * padding - kh) // stride + 1
    wo = (ww + 2 * padding - kw) // stride + 1
    y = np.zeros((n, co, ho, wo))
    for ni in range(n):
        for oc in range(co):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ic in range(ci):
                        for di in range(kh):
                            for dj in range(kw):
                                acc += xp[ni, ic, i * stride + di, j * stride + dj] * w[oc, ic, di, dj]
                    y[ni, oc, i, j] = acc + b[oc]
    return y


@pytest.mark.parametrize("padding,stride", [(0, 1), (1, 1), (1, 2)])
def test_conv_forward_matches_loop_oracle(padding, stride):
    rng = make_rng(11, 0)
    x = rng.uniform(-1, 1, (2, 3, 6, 6))
    w = rng.uniform(-1, 1, (4, 3, 3, 3))
    b = rng.uniform(-1, 1, 4)
    expect = _conv_oracle(x, w, b, padding, stride)
    for impl in (numpy_ops, numba_ops):
        got = impl.conv2d_forward(x, w, b, padding, stride)
        assert got.shape == expect.shape
        assert np.max(np.abs(got - expect)) < 1e-12


def test_conv_forward_backends_agree():
    rng = make_rng(12, 0)
    x = rng.uniform(-1, 1, (3, 4, 9, 7))
    w = rng.uniform(-1, 1, (5, 4, 3, 3))
    b = rng.uniform(-1, 1, 5)
    a = numpy_ops.conv2d_forward(x, w, b, 1, 1)
    c = numba_ops.conv2d_forward(x, w, b, 1, 1)
    # Different summation orders, so agreement is to rounding, not bits.
    assert np.max(np.abs(a - c)) < 1e-10


def test_conv_backward_backends_agree():
    rng = make_rng(13, 0)
    x = rng.uniform(-1, 1, (2, 3, 8, 8))
    w = rng.uniform(-1, 1, (4, 3, 3, 3))
    dy_shape = numpy_ops.conv2d_forward(x, w, np.zeros(4), 1, 1).shape
    dy = rng.uniform(-1, 1, dy_shape)
    ax, aw, ab = numpy_ops.conv2d_backward(x, w, dy, 1, 1)
    cx, cw, cb = numba_ops.conv2d_backward(x, w, dy, 1, 1)
    assert np.max(np.abs(ax - cx)) < 1e-10
    assert np.max(np.abs(aw - cw)) < 1e-10
    assert np.max(np.abs(ab - cb)) < 1e-10


def test_maxpool_backends_bitwise_identical():
    rng = make_rng(14, 0)
    x = rng.uniform(-1, 1, (3, 2, 8, 6))
    ya, aa = numpy_ops.maxpool2_forward(x)
    yb, ab = numba_ops.maxpool2_forward(x)
    assert np.array_equal(ya, yb)
    assert np.array_equal(aa, ab)
    dy = rng.uniform(-1, 1, ya.shape)
    da = numpy_ops.maxpool2_backward(dy, aa, 8, 6)
    db = numba_ops.maxpool2_backward(dy, ab, 8, 6)
    assert np.array_equal(da, db)


def test_maxpool_tie_breaks_to_first_row_major():
    x = np.full((1, 1, 2, 2), 0.25)
    y, arg = kernels.maxpool2_forward(x)
    assert y[0, 0, 0, 0] == 0.25
    assert arg[0, 0, 0, 0] == 0

    x2 = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
    y2, arg2 = kernels.maxpool2_forward(x2)
    assert y2[0, 0, 0, 0] == 4.0
    assert arg2[0, 0, 0, 0] == 3  # position (1,1) in row-major window order


def test_binning_backends_bitwise_identical():
    rng = make_rng(15, 0)
    w = rng.uniform(-1.4, 1.4, 5000)  # includes out-of-range values
    for fn in ("hard_bin_counts", "soft_bin_counts"):
        a = getattr(numpy_ops, fn)(w, -1.0, 1.0, 80)
        b = getattr(numba_ops, fn)(w, -1.0, 1.0, 80)
        assert np.array_equal(a, b), fn
    d_rho = rng.uniform(-1, 1, 80)
    ga = numpy_ops.soft_bin_grad(w, -1.0, 1.0, 80, d_rho, w.size)
    gb = numba_ops.soft_bin_grad(w, -1.0, 1.0, 80, d_rho, w.size)
    assert np.array_equal(ga, gb)


def test_hard_bin_boundary_rules():
    # An interior edge belongs to the bin on its right; the final edge
    # belongs to the last bin; out-of-range values clamp into edge bins.
    counts = kernels.hard_bin_counts(np.array([0.0]), -1.0, 1.0, 2)
    assert counts.tolist() == [0.0, 1.0]
    counts = kernels.hard_bin_counts(np.array([1.0]), -1.0, 1.0, 4)
    assert counts.tolist() == [0.0, 0.0, 0.0, 1.0]
    counts = kernels.hard_bin_counts(np.array([-1.0]), -1.0, 1.0, 4)
    assert counts.tolist() == [1.0, 0.0, 0.0, 0.0]
    counts = kernels.hard_bin_counts(np.array([-7.0, 9.0]), -1.0, 1.0, 4)
    assert counts.tolist() == [1.0, 0.0, 0.0, 1.0]


def test_hard_bin_matches_numpy_histogram_interior():
    # Strictly interior, boundary-free samples must agree with np.histogram.
    rng = make_rng(16, 0)
    w = rng.uniform(-0.999, 0.999, 4000)
    counts = kernels.hard_bin_counts(w, -1.0, 1.0, 80)
    expect, _ = np.histogram(w, bins=80, range=(-1.0, 1.0))
    assert np.array_equal(counts, expect.astype(np.float64))


def test_soft_bin_center_and_midpoint_mass():
    # Exactly at a bin center the full unit lands in that bin; halfway
    # between centers it splits evenly. B=16 on [-1,1] keeps the grid dyadic.
    lo, hi, b = -1.0, 1.0, 16
    width = (hi - lo) / b
    center3 = lo + (3 + 0.5) * width
    counts = kernels.soft_bin_counts(np.array([center3]), lo, hi, b)
    assert counts[3] == 1.0 and counts.sum() == 1.0

    mid = lo + (3 + 1.0) * width  # midpoint of centers 3 and 4
    counts = kernels.soft_bin_counts(np.array([mid]), lo, hi, b)
    assert counts[3] == 0.5 and counts[4] == 0.5

    beyond = np.array([lo - 3.0, hi + 3.0])
    counts = kernels.soft_bin_counts(beyond, lo, hi, b)
    assert counts[0] == 1.0 and counts[b - 1] == 1.0


def test_bin_counts_sum_to_n():
    rng = make_rng(17, 0)
    w = rng.uniform(-2, 2, 1234)
    for fn in (kernels.hard_bin_counts, kernels.soft_bin_counts):
        counts = fn(w, -1.0, 1.0, 80)
        assert abs(counts.sum() - w.size) < 1e-9


def test_soft_bin_grad_zero_outside_outer_centers():
    lo, hi, b = -1.0, 1.0, 16
    width = (hi - lo) / b
    w = np.array([lo - 0.5, lo + 0.25 * width, hi - 0.25 * width, hi + 0.5])
    d_rho = np.ones(b)
    g = kernels.soft_bin_grad(w, lo, hi, b, d_rho, w.size)
    assert np.array_equal(g, np.zeros(4))


def _run_with_backend(value):
    code = ("import dfreg.kernels as k; print(k.BACKEND)")
    env = dict(os.environ, DFREG_BACKEND=value)
    return subprocess.run([sys.executable, "-c", code], env=env,
                          capture_output=True, text=True)


def test_backend_env_dispatch():
    out = _run_with_backend("numpy")
    assert out.returncode == 0 and out.stdout.strip() == "numpy"
    out = _run_with_backend("numba")
    assert out.returncode == 0 and out.stdout.strip() == "numba"
    out = _run_with_backend("fortran")
    assert out.returncode != 0
    assert "DFREG_BACKEND" in out.stderr
