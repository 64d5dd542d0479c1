"""Finite-difference verification suite over every backward pass.

Each op gets `cases` random configurations; a case draws fresh inputs,
scalarizes the op output through a fixed random projection, and runs
gradient_check over every input (and parameter) tensor. ReLU, max-pool,
and the soft-binning penalty are sampled away from their kinks so the
central differences see a smooth function.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .density import SOFT, EnergyConfig, dfreg_loss
from .errors import ConfigError
from .gradcheck import gradient_check
from .layers import BatchNorm2d, Dropout
from .loss import softmax_cross_entropy
from .rng import DROPOUT, make_rng
from .tensor import ParameterSet

THRESHOLD = 1e-4

OP_NAMES = ("conv2d", "dense", "relu", "max_pool2", "batch_norm2d",
            "dropout", "softmax_cross_entropy", "dfreg_loss")
ALIASES = {"dfreg": "dfreg_loss", "softmax": "softmax_cross_entropy",
           "maxpool": "max_pool2", "batchnorm": "batch_norm2d",
           "conv": "conv2d"}


@dataclass
class SuiteResult:
    op: str
    cases: int
    max_rel_error: float
    threshold: float = THRESHOLD

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.threshold


def _case_conv2d(rng, h):
    x = rng.uniform(-1.0, 1.0, (1, 2, 5, 5))
    w = rng.uniform(-1.0, 1.0, (3, 2, 3, 3))
    b = rng.uniform(-1.0, 1.0, 3)
    padding = int(rng.integers(0, 2))
    proj_shape = kernels.conv2d_forward(x, w, b, padding, 1).shape
    proj = rng.uniform(-1.0, 1.0, proj_shape)

    def f_x(v):
        y = kernels.conv2d_forward(v, w, b, padding, 1)
        dx, _, _ = kernels.conv2d_backward(v, w, proj, padding, 1)
        return float(np.sum(proj * y)), dx

    def f_w(v):
        y = kernels.conv2d_forward(x, v, b, padding, 1)
        _, dw, _ = kernels.conv2d_backward(x, v, proj, padding, 1)
        return float(np.sum(proj * y)), dw

    def f_b(v):
        y = kernels.conv2d_forward(x, w, v, padding, 1)
        _, _, db = kernels.conv2d_backward(x, w, proj, padding, 1)
        return float(np.sum(proj * y)), db

    return max(gradient_check(f_x, x, h), gradient_check(f_w, w, h),
               gradient_check(f_b, b, h))


def _case_dense(rng, h):
    x = rng.uniform(-1.0, 1.0, (2, 5))
    w = rng.uniform(-1.0, 1.0, (4, 5))
    b = rng.uniform(-1.0, 1.0, 4)
    proj = rng.uniform(-1.0, 1.0, (2, 4))

    def f_x(v):
        return float(np.sum(proj * (v @ w.T + b))), proj @ w

    def f_w(v):
        return float(np.sum(proj * (x @ v.T + b))), proj.T @ x

    def f_b(v):
        return float(np.sum(proj * (x @ w.T + v))), proj.sum(axis=0)

    return max(gradient_check(f_x, x, h), gradient_check(f_w, w, h),
               gradient_check(f_b, b, h))


def _case_relu(rng, h):
    x = rng.uniform(-1.0, 1.0, (3, 7))
    # Keep samples away from the kink at 0.
    small = np.abs(x) < 1e-3
    x[small] = np.sign(x[small] + 1e-12) * 2e-3
    proj = rng.uniform(-1.0, 1.0, x.shape)

    def f(v):
        return float(np.sum(proj * np.maximum(v, 0.0))), proj * (v > 0.0)

    return gradient_check(f, x, h)


def _case_max_pool2(rng, h):
    while True:
        x = rng.uniform(-1.0, 1.0, (2, 2, 4, 4))
        win = x.reshape(2, 2, 2, 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(2, 2, 2, 2, 4)
        top2 = np.sort(win, axis=-1)[..., -2:]
        if np.all(top2[..., 1] - top2[..., 0] > 1e-3):
            break
    proj = rng.uniform(-1.0, 1.0, (2, 2, 2, 2))

    def f(v):
        y, arg = kernels.maxpool2_forward(np.ascontiguousarray(v))
        dx = kernels.maxpool2_backward(proj, arg, 4, 4)
        return float(np.sum(proj * y)), dx

    return gradient_check(f, x, h)


def _case_batch_norm2d(rng, h):
    x = rng.uniform(-1.0, 1.0, (4, 2, 3, 3))
    gamma = rng.uniform(0.5, 1.5, 2)
    beta = rng.uniform(-0.5, 0.5, 2)
    proj = rng.uniform(-1.0, 1.0, x.shape)

    def run(xv, gv, bv):
        pset = ParameterSet()
        bn = BatchNorm2d(pset, "bn", 2)
        bn.gamma.value[:] = gv
        bn.beta.value[:] = bv
        y = bn.forward(xv, mode="train")
        dx = bn.backward(proj)
        return (float(np.sum(proj * y)), dx,
                bn.gamma.grad.copy(), bn.beta.grad.copy())

    def f_x(v):
        value, dx, _, _ = run(v, gamma, beta)
        return value, dx

    def f_gamma(v):
        value, _, dg, _ = run(x, v, beta)
        return value, dg

    def f_beta(v):
        value, _, _, db = run(x, gamma, v)
        return value, db

    return max(gradient_check(f_x, x, h), gradient_check(f_gamma, gamma, h),
               gradient_check(f_beta, beta, h))


def _case_dropout(rng, h):
    x = rng.uniform(-1.0, 1.0, (4, 6))
    proj = rng.uniform(-1.0, 1.0, x.shape)
    mask_seed = int(rng.integers(0, 2**31))

    def f(v):
        layer = Dropout(0.3)
        y = layer.forward(v, mode="train", rng=make_rng(mask_seed, DROPOUT))
        dx = layer.backward(proj)
        return float(np.sum(proj * y)), dx

    return gradient_check(f, x, h)


def _case_softmax_cross_entropy(rng, h):
    logits = rng.uniform(-2.0, 2.0, (4, 5))
    labels = rng.integers(0, 5, size=4)
    smoothing = float(rng.choice([0.0, 0.1]))

    def f(v):
        return softmax_cross_entropy(v, labels, smoothing)

    return gradient_check(f, logits, h)


def _away_from_breakpoints(rng, n, config, margin):
    """Weights with w-space distance >= margin from every soft-binning
    breakpoint (bin centers and the clamp edges)."""
    width = config.bin_width
    w = rng.uniform(-0.9, 0.9, n)
    for _ in range(100):
        t = (w - config.range_lo) / width - 0.5
        dist = np.abs(t - np.round(t)) * width
        bad = dist < margin
        if not bad.any():
            return w
        w[bad] = rng.uniform(-0.9, 0.9, int(bad.sum()))
    raise ConfigError("could not sample weights away from breakpoints")


def _case_dfreg_loss(rng, h):
    use_kinetic = bool(rng.integers(0, 2))
    config = EnergyConfig(alpha=1e-3, lam=1e-4 if use_kinetic else 0.0,
                          kinetic_coeff=1e-3 if use_kinetic else 0.0,
                          num_bins=16, range_lo=-1.0, range_hi=1.0,
                          binning=SOFT)
    w = _away_from_breakpoints(rng, 64, config, margin=1e-3 + 10 * h)

    def f(v):
        breakdown, grad = dfreg_loss(v, config, with_grad=True)
        return breakdown.dfreg_loss + breakdown.l2, grad

    return gradient_check(f, w, h)


_CASES = {
    "conv2d": _case_conv2d,
    "dense": _case_dense,
    "relu": _case_relu,
    "max_pool2": _case_max_pool2,
    "batch_norm2d": _case_batch_norm2d,
    "dropout": _case_dropout,
    "softmax_cross_entropy": _case_softmax_cross_entropy,
    "dfreg_loss": _case_dfreg_loss,
}


def resolve_ops(names) -> list:
    if not names:
        return list(OP_NAMES)
    chosen = []
    for name in names:
        canonical = ALIASES.get(name, name)
        if canonical not in OP_NAMES:
            raise ConfigError(
                f"unknown op {name!r}; expected one of {', '.join(OP_NAMES)}"
            )
        if canonical not in chosen:
            chosen.append(canonical)
    return chosen


def run_suite(seed: int = 0, h: float = 1e-5, ops=None,
              cases: int = 100) -> list:
    """Run `cases` random gradient checks per op; returns SuiteResults."""
    if h <= 0.0:
        raise ConfigError(f"h must be positive, got {h}")
    if cases < 1:
        raise ConfigError(f"cases must be >= 1, got {cases}")
    results = []
    for op in resolve_ops(ops):
        rng = make_rng(seed, 7)
        worst = 0.0
        for _ in range(cases):
            worst = max(worst, _CASES[op](rng, h))
        results.append(SuiteResult(op=op, cases=cases, max_rel_error=worst))
    return results
