"""Layer forward/backward pairs.

Reverse-mode gradients are implemented per layer as explicit forward and
backward methods; the model executor wires them in sequence. Every layer
caches exactly what its backward pass needs and accumulates parameter
gradients into the owning ParameterSet (callers zero grads between steps).
All arrays are C-contiguous float64.
"""

import numpy as np

from . import kernels
from .errors import ConfigError, NumericError, ShapeError
from .tensor import ParameterSet, as_tensor


def _uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv2d:
    """2D cross-correlation over [N, Cin, H, W] with an [Cout, Cin, kh, kw]
    kernel, zero padding, and a per-output-channel bias."""

    def __init__(self, pset: ParameterSet, name: str, in_channels: int,
                 out_channels: int, kernel_size: int, padding: int = 0,
                 stride: int = 1, rng=None):
        if stride < 1:
            raise ConfigError(f"{name}: stride must be >= 1, got {stride}")
        if padding < 0:
            raise ConfigError(f"{name}: padding must be >= 0, got {padding}")
        self.name = name
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.padding = padding
        self.stride = stride
        fan_in = in_channels * kernel_size * kernel_size
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        self.weight = pset.add(f"{name}.weight", "conv_kernel",
                               _uniform_init(rng, shape, fan_in))
        self.bias = pset.add(f"{name}.bias", "bias",
                             _uniform_init(rng, (out_channels,), fan_in))
        self._x = None

    def _check_input(self, x):
        if x.ndim != 4:
            raise ShapeError(f"{self.name}: expected 4-d input, got {x.ndim}-d")
        if x.shape[1] != self.in_channels:
            raise ShapeError(
                f"{self.name}: input channel axis (axis 1) is {x.shape[1]}, "
                f"kernel expects {self.in_channels}"
            )
        k, p, s = self.kernel_size, self.padding, self.stride
        for axis, dim in ((2, x.shape[2]), (3, x.shape[3])):
            if dim + 2 * p < k:
                raise ShapeError(
                    f"{self.name}: kernel size {k} exceeds padded input on axis {axis} "
                    f"({dim} + 2*{p})"
                )
            if (dim + 2 * p - k) % s != 0:
                raise ConfigError(
                    f"{self.name}: non-integer output size on axis {axis}: "
                    f"({dim} + 2*{p} - {k}) not divisible by stride {s}"
                )

    def forward(self, x, mode="train", rng=None):
        x = as_tensor(x)
        self._check_input(x)
        self._x = x
        return kernels.conv2d_forward(x, self.weight.value, self.bias.value,
                                      self.padding, self.stride)

    def backward(self, dy):
        dy = as_tensor(dy)
        dx, dw, db = kernels.conv2d_backward(self._x, self.weight.value, dy,
                                             self.padding, self.stride)
        self.weight.grad += dw
        self.bias.grad += db
        return dx


class Dense:
    """Affine layer: out = x @ weight.T + bias for x[N, F], weight[O, F]."""

    def __init__(self, pset: ParameterSet, name: str, in_features: int,
                 out_features: int, rng=None):
        self.name = name
        self.in_features = in_features
        self.out_features = out_features
        self.weight = pset.add(f"{name}.weight", "dense_weight",
                               _uniform_init(rng, (out_features, in_features), in_features))
        self.bias = pset.add(f"{name}.bias", "bias",
                             _uniform_init(rng, (out_features,), in_features))
        self._x = None

    def forward(self, x, mode="train", rng=None):
        x = as_tensor(x)
        if x.ndim != 2:
            raise ShapeError(f"{self.name}: expected 2-d input, got {x.ndim}-d")
        if x.shape[1] != self.in_features:
            raise ShapeError(
                f"{self.name}: input feature axis (axis 1) is {x.shape[1]}, "
                f"weight expects {self.in_features}"
            )
        self._x = x
        return x @ self.weight.value.T + self.bias.value

    def backward(self, dy):
        self.weight.grad += dy.T @ self._x
        self.bias.grad += dy.sum(axis=0)
        return dy @ self.weight.value


class Relu:
    """Elementwise max(0, x); subgradient at 0 is 0."""

    def __init__(self):
        self._mask = None

    def forward(self, x, mode="train", rng=None):
        self._mask = x > 0.0
        return np.maximum(x, 0.0)

    def backward(self, dy):
        return dy * self._mask


class MaxPool2:
    """2x2 stride-2 max pooling; ties break to the first element in
    row-major window order."""

    def __init__(self):
        self._arg = None
        self._in_hw = None

    def forward(self, x, mode="train", rng=None):
        if x.ndim != 4:
            raise ShapeError(f"max_pool2: expected 4-d input, got {x.ndim}-d")
        if x.shape[2] % 2 or x.shape[3] % 2:
            raise ConfigError(
                f"max_pool2: spatial dims must be even, got {x.shape[2]}x{x.shape[3]}"
            )
        y, arg = kernels.maxpool2_forward(as_tensor(x))
        self._arg = arg
        self._in_hw = (x.shape[2], x.shape[3])
        return y

    def backward(self, dy):
        return kernels.maxpool2_backward(as_tensor(dy), self._arg, *self._in_hw)


class BatchNorm2d:
    """Per-channel standardization over (N, H, W) with learnable gamma/beta
    and exponentially averaged running statistics for eval mode."""

    def __init__(self, pset: ParameterSet, name: str, channels: int,
                 epsilon: float = 1e-5, momentum: float = 0.1):
        self.name = name
        self.channels = channels
        self.epsilon = epsilon
        self.momentum = momentum
        self.gamma = pset.add(f"{name}.gamma", "bn_gamma", np.ones(channels))
        self.beta = pset.add(f"{name}.beta", "bn_beta", np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self._cache = None

    def forward(self, x, mode="train", rng=None):
        x = as_tensor(x)
        if x.ndim != 4:
            raise ShapeError(f"{self.name}: expected 4-d input, got {x.ndim}-d")
        if x.shape[1] != self.channels:
            raise ShapeError(
                f"{self.name}: channel axis (axis 1) is {x.shape[1]}, expected {self.channels}"
            )
        if mode == "train":
            n, _, h, w = x.shape
            m = n * h * w
            if m < 2:
                raise NumericError(
                    f"{self.name}: train-mode batch has {m} value(s) per channel; "
                    "variance is degenerate (need >= 2)"
                )
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            # Running variance uses the unbiased estimate, as is conventional.
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var * m / (m - 1)
        else:
            mean = self.running_mean
            var = self.running_var
        inv = 1.0 / np.sqrt(var + self.epsilon)
        xhat = (x - mean[None, :, None, None]) * inv[None, :, None, None]
        self._cache = (xhat, inv, mode)
        return self.gamma.value[None, :, None, None] * xhat + self.beta.value[None, :, None, None]

    def backward(self, dy):
        xhat, inv, mode = self._cache
        if mode != "train":
            raise ConfigError(f"{self.name}: backward is only defined after a train-mode forward")
        n, _, h, w = dy.shape
        m = n * h * w
        self.beta.grad += dy.sum(axis=(0, 2, 3))
        self.gamma.grad += (dy * xhat).sum(axis=(0, 2, 3))
        dxhat = dy * self.gamma.value[None, :, None, None]
        s1 = dxhat.sum(axis=(0, 2, 3))[None, :, None, None]
        s2 = (dxhat * xhat).sum(axis=(0, 2, 3))[None, :, None, None]
        return (inv[None, :, None, None] / m) * (m * dxhat - s1 - xhat * s2)


class Dropout:
    """Inverted dropout: train mode zeroes with probability p and scales
    survivors by 1/(1-p); eval mode is the identity. The mask is a pure
    function of the generator passed to forward."""

    def __init__(self, p: float):
        if not 0.0 <= p < 1.0:
            raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
        self.p = p
        self._mask = None

    def forward(self, x, mode="train", rng=None):
        if mode != "train" or self.p == 0.0:
            self._mask = None
            return x
        keep = rng.random(size=x.shape) >= self.p
        self._mask = keep / (1.0 - self.p)
        return x * self._mask

    def backward(self, dy):
        if self._mask is None:
            return dy
        return dy * self._mask


class Flatten:
    """Collapse all non-batch axes."""

    def __init__(self):
        self._shape = None

    def forward(self, x, mode="train", rng=None):
        self._shape = x.shape
        return np.ascontiguousarray(x.reshape(x.shape[0], -1))

    def backward(self, dy):
        return np.ascontiguousarray(dy.reshape(self._shape))
