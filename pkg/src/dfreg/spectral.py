"""Frequency-domain diagnostics of convolutional kernels.

Kernels here are tiny (at most 7x7), so the transform is evaluated as the
literal unnormalized DFT sum via two complex exponential matrix products.
That direct form is its own specification: no FFT factorization, radix
handling, or padding enters the contract.

Spectra are reported as magnitude grids averaged over all channel slices,
then center-shifted so the DC bin sits at (kh//2, kw//2). Energy summaries
(dc_fraction, low_frequency_ratio) use squared magnitudes.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError, ShapeError


@dataclass
class FilterSpectrum:
    """Centered magnitude spectrum of one conv layer's kernels."""

    layer_name: str
    grid: np.ndarray
    kernel_shape: tuple
    dc_fraction: float


def dft2_magnitude(kernel: np.ndarray) -> np.ndarray:
    """Magnitude of the unnormalized 2D DFT of a real kh x kw kernel.

    F[u, v] = sum_{y, x} kernel[y, x] * exp(-2*pi*i*(u*y/kh + v*x/kw)),
    returned uncentered (DC at [0, 0]).
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 2:
        raise ShapeError(f"dft2_magnitude: expected 2-d kernel, got {kernel.ndim}-d")
    if not np.all(np.isfinite(kernel)):
        raise NumericError("dft2_magnitude: kernel contains non-finite values")
    kh, kw = kernel.shape
    u = np.arange(kh)
    x = np.arange(kw)
    row = np.exp(-2j * np.pi * np.outer(u, u) / kh)
    col = np.exp(-2j * np.pi * np.outer(x, x) / kw)
    return np.abs(row @ kernel @ col)


def average_channel_spectrum(kernel_tensor: np.ndarray,
                             layer_name: str = "") -> FilterSpectrum:
    """Mean magnitude spectrum over all (Cout x Cin) kernel slices, centered.

    dc_fraction is the squared-magnitude share of the DC cell; a zero
    kernel tensor yields dc_fraction 0.0.
    """
    kernel_tensor = np.asarray(kernel_tensor, dtype=np.float64)
    if kernel_tensor.ndim != 4:
        raise ShapeError(
            f"average_channel_spectrum: expected 4-d kernel tensor, got {kernel_tensor.ndim}-d"
        )
    cout, cin, kh, kw = kernel_tensor.shape
    acc = np.zeros((kh, kw))
    for co in range(cout):
        for ci in range(cin):
            acc += dft2_magnitude(kernel_tensor[co, ci])
    mean = acc / (cout * cin)
    centered = np.roll(mean, (kh // 2, kw // 2), axis=(0, 1))
    power = centered * centered
    total = float(power.sum())
    dc = float(power[kh // 2, kw // 2])
    dc_fraction = dc / total if total > 0.0 else 0.0
    return FilterSpectrum(layer_name=layer_name, grid=centered,
                          kernel_shape=(cout, cin, kh, kw),
                          dc_fraction=dc_fraction)


def low_frequency_ratio(spectrum: FilterSpectrum, radius: float) -> float:
    """Fraction of squared magnitude within Euclidean distance <= radius of
    the centered DC cell. A sequential row-major accumulation keeps the
    result reproducible by plain cell enumeration."""
    if radius < 0.0:
        raise ConfigError(f"radius must be >= 0, got {radius}")
    grid = spectrum.grid
    kh, kw = grid.shape
    cy, cx = kh // 2, kw // 2
    r2 = radius * radius
    total = 0.0
    within = 0.0
    for r in range(kh):
        for c in range(kw):
            e = grid[r, c] * grid[r, c]
            total += e
            if (r - cy) * (r - cy) + (c - cx) * (c - cx) <= r2:
                within += e
    if total == 0.0:
        return 0.0
    return float(within / total)


def write_spectrum_csv(spectrum: FilterSpectrum, path, radius: float = 1.0) -> None:
    """CSV grid (rows = shifted frequency rows) with scalar sidecar lines."""
    lines = [
        f"# layer={spectrum.layer_name} kernel_shape={spectrum.kernel_shape} "
        "centered=true"
    ]
    for r in range(spectrum.grid.shape[0]):
        lines.append(",".join(repr(float(v)) for v in spectrum.grid[r]))
    lines.append(f"dc_fraction={spectrum.dc_fraction!r}")
    lines.append(
        f"low_frequency_ratio={low_frequency_ratio(spectrum, radius)!r}"
    )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
