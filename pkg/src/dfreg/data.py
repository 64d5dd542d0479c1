"""Dataset ingestion: IDX files, a deterministic synthetic generator, and
the horizontal-flip augmentation.

IDX layout: two zero magic bytes, a dtype byte (only 0x08, unsigned byte,
is supported), a dimension-count byte, big-endian 32-bit dimension sizes,
then the payload. Payloads with 2 or more dimensions are treated as images
and scaled to [0, 1] by division by 255; 1-d payloads are label vectors.
Parsing is strict: truncated or trailing bytes are errors that report the
byte offset where the stream went wrong.
"""

import gzip
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError, ShapeError
from .rng import SYNTH_TEST, SYNTH_TRAIN, make_rng

IDX_UBYTE = 0x08


@dataclass
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: str

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ShapeError(f"dataset images must be 4-d, got {self.images.ndim}-d")
        if self.labels.shape != (self.images.shape[0],):
            raise ShapeError(
                f"labels length {self.labels.shape} does not match image count "
                f"(axis 0) {self.images.shape[0]}"
            )
        if self.labels.size and int(self.labels.max()) >= self.num_classes:
            raise ConfigError(
                f"label {int(self.labels.max())} out of range for {self.num_classes} classes"
            )

    def __len__(self):
        return self.images.shape[0]

    def subset(self, n: int) -> "Dataset":
        if n <= 0 or n >= len(self):
            return self
        return Dataset(images=self.images[:n], labels=self.labels[:n],
                       num_classes=self.num_classes, split=self.split)


def parse_idx(data: bytes) -> np.ndarray:
    """Decode one IDX byte stream.

    Returns float64 images in [0, 1] for 2-d or higher payloads, int64
    labels for 1-d payloads.
    """
    if len(data) < 4:
        raise ParseError(f"IDX header needs 4 bytes, got {len(data)}", offset=len(data))
    if data[0] != 0 or data[1] != 0:
        bad = 0 if data[0] != 0 else 1
        raise ParseError(
            f"bad IDX magic byte 0x{data[bad]:02x} (expected 0x00)", offset=bad
        )
    if data[2] != IDX_UBYTE:
        raise ParseError(
            f"unsupported IDX dtype 0x{data[2]:02x} (only 0x08 unsigned byte)", offset=2
        )
    ndim = data[3]
    if ndim == 0:
        raise ParseError("IDX dimension count must be >= 1", offset=3)
    header_len = 4 + 4 * ndim
    if len(data) < header_len:
        raise ParseError(
            f"truncated IDX header: need {header_len} bytes, got {len(data)}",
            offset=len(data),
        )
    dims = struct.unpack(f">{ndim}I", data[4:header_len])
    expected = 1
    for d in dims:
        expected *= d
    payload = data[header_len:]
    if len(payload) < expected:
        raise ParseError(
            f"truncated IDX payload: expected {expected} bytes, got {len(payload)}",
            offset=header_len + len(payload),
        )
    if len(payload) > expected:
        raise ParseError(
            f"trailing bytes after IDX payload: expected {expected} bytes, got {len(payload)}",
            offset=header_len + expected,
        )
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(dims)
    if ndim == 1:
        return raw.astype(np.int64)
    return np.ascontiguousarray(raw.astype(np.float64) / 255.0)


def write_idx(array: np.ndarray) -> bytes:
    """Encode a uint8 array as IDX bytes (inverse of parse_idx's layout)."""
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise ConfigError(f"write_idx requires uint8 data, got {array.dtype}")
    if array.ndim < 1 or array.ndim > 255:
        raise ConfigError(f"write_idx supports 1..255 dims, got {array.ndim}")
    header = struct.pack(f">BBBB{array.ndim}I", 0, 0, IDX_UBYTE, array.ndim,
                         *array.shape)
    return header + np.ascontiguousarray(array).tobytes()


def _read_maybe_gz(directory: Path, stem: str) -> bytes:
    plain = directory / stem
    if plain.exists():
        return plain.read_bytes()
    gz = directory / (stem + ".gz")
    if gz.exists():
        with gzip.open(gz, "rb") as fh:
            return fh.read()
    raise ConfigError(f"dataset file not found: {plain} (or {gz.name})")


def load_mnist_dir(directory) -> tuple:
    """Load the four standard IDX files (optionally gzipped) from a
    directory. Returns (train Dataset, test Dataset)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"dataset directory not found: {directory}")
    parts = {}
    for split, img_stem, lab_stem in (
        ("train", "train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        ("test", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    ):
        images = parse_idx(_read_maybe_gz(directory, img_stem))
        labels = parse_idx(_read_maybe_gz(directory, lab_stem))
        if images.ndim != 3:
            raise ParseError(
                f"{split} images: expected 3 dims [N,H,W], got {images.ndim}"
            )
        if labels.ndim != 1 or labels.shape[0] != images.shape[0]:
            raise ParseError(
                f"{split} labels: {labels.shape[0]} entries for {images.shape[0]} images"
            )
        parts[split] = (images[:, None, :, :], labels)
    k = 0
    for images, labels in parts.values():
        if labels.size:
            k = max(k, int(labels.max()) + 1)
    k = max(k, 2)
    return (
        Dataset(images=parts["train"][0], labels=parts["train"][1],
                num_classes=k, split="train"),
        Dataset(images=parts["test"][0], labels=parts["test"][1],
                num_classes=k, split="test"),
    )


def synth_dataset(seed: int, n: int, k: int, size: int = 28,
                  split: str = "train") -> Dataset:
    """Deterministic class-conditional blob patterns.

    Class c places a bright Gaussian blob at a class-specific angle around
    the image center (small jittered offset, mild background noise), which
    keeps the classes linearly separable by construction. Labels cycle
    round-robin so every class is balanced. Same (seed, split) gives
    bit-identical tensors; train and test draw from separate streams.
    """
    if k < 2:
        raise ConfigError(f"synth_dataset needs k >= 2, got {k}")
    if split not in ("train", "test"):
        raise ConfigError(f"split must be 'train' or 'test', got {split!r}")
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    rng = make_rng(seed, SYNTH_TRAIN if split == "train" else SYNTH_TEST)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    images = np.zeros((n, 1, size, size))
    labels = np.arange(n, dtype=np.int64) % k
    r_orbit = size / 4.0
    sigma = size / 8.0
    for i in range(n):
        c = labels[i]
        angle = 2.0 * math.pi * c / k
        cy = size / 2.0 + r_orbit * math.sin(angle) + rng.uniform(-1.0, 1.0)
        cx = size / 2.0 + r_orbit * math.cos(angle) + rng.uniform(-1.0, 1.0)
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma * sigma))
        noise = rng.uniform(0.0, 0.15, size=(size, size))
        images[i, 0] = np.clip(0.85 * blob + noise, 0.0, 1.0)
    return Dataset(images=images, labels=labels, num_classes=k, split=split)


def augment_flip(images: np.ndarray, rng) -> np.ndarray:
    """Mirror each image horizontally with probability 0.5 (label-preserving)."""
    if images.ndim != 4:
        raise ShapeError(f"augment_flip: expected 4-d images, got {images.ndim}-d")
    coins = rng.random(size=images.shape[0]) < 0.5
    out = images.copy()
    out[coins] = out[coins, :, :, ::-1]
    return out
