"""Softmax cross-entropy with optional label smoothing.

The loss is averaged over the batch. With smoothing s and K classes the
target distribution is q = (1 - s) * onehot + s / K, and the gradient with
respect to the logits is (softmax - q) / N. Logits are shifted by their
row max before exponentiation so large values cannot overflow.
"""

import numpy as np

from .errors import ConfigError, ShapeError


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray,
                          smoothing: float = 0.0):
    """Return (loss, grad) for logits[N, K] and integer labels[N]."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy: expected 2-d logits, got {logits.ndim}-d")
    if labels.ndim != 1 or labels.shape[0] != logits.shape[0]:
        raise ShapeError(
            f"softmax_cross_entropy: labels shape {labels.shape} does not match "
            f"batch axis (axis 0) of logits {logits.shape}"
        )
    if not 0.0 <= smoothing < 1.0:
        raise ConfigError(f"label smoothing must be in [0, 1), got {smoothing}")
    n, k = logits.shape
    bad = np.flatnonzero((labels < 0) | (labels >= k))
    if bad.size:
        i = int(bad[0])
        raise ConfigError(
            f"softmax_cross_entropy: label {int(labels[i])} at batch index {i} "
            f"is outside [0, {k})"
        )

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    p = np.exp(log_p)

    q = np.full((n, k), smoothing / k)
    q[np.arange(n), labels] += 1.0 - smoothing

    loss = float(-(q * log_p).sum() / n)
    grad = (p - q) / n
    return loss, grad
