"""Desk-scale CNN construction across the regularization variants.

Architecture: per conv block conv(k x k, pad k//2) -> [BatchNorm?] ->
ReLU -> 2x2 max pool; then flatten -> [Dropout?] -> dense(hidden) ->
ReLU -> dense(num_classes). Variant flags insert exactly their own
component; the density penalty variants change nothing structural, so
plain/dfreg_no_bn and batchnorm/dfreg are architecture twins.

Initialization is uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] from the
seeded INIT stream; BatchNorm gamma/beta start at 1/0 without consuming
random draws, so all variants of one seed share their conv/dense draws.
"""

from dataclasses import dataclass

from .errors import ConfigError
from .layers import BatchNorm2d, Conv2d, Dense, Dropout, Flatten, MaxPool2, Relu
from .rng import INIT, make_rng
from .tensor import ParameterSet

VARIANTS = ("plain", "l2", "dropout", "batchnorm", "dfreg", "dfreg_no_bn")
# Variants whose architecture includes BatchNorm after each conv.
BN_VARIANTS = ("batchnorm", "dfreg")
DROPOUT_VARIANTS = ("dropout",)
# Variants trained with the density penalty active.
PENALIZED_VARIANTS = ("dfreg", "dfreg_no_bn")


@dataclass
class ModelSpec:
    variant: str = "plain"
    conv_channels: tuple = (16, 32)
    kernel_size: int = 3
    dropout_p: float = 0.5
    dense_hidden: int = 128
    num_classes: int = 10
    in_channels: int = 1
    image_size: int = 28

    def __post_init__(self):
        self.conv_channels = tuple(int(c) for c in self.conv_channels)
        if self.variant not in VARIANTS:
            raise ConfigError(
                f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}"
            )
        if not self.conv_channels or any(c < 1 for c in self.conv_channels):
            raise ConfigError(f"conv_channels must be positive, got {self.conv_channels}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError(f"kernel_size must be odd and >= 1, got {self.kernel_size}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.dense_hidden < 1:
            raise ConfigError(f"dense_hidden must be >= 1, got {self.dense_hidden}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.in_channels < 1:
            raise ConfigError(f"in_channels must be >= 1, got {self.in_channels}")
        side = self.image_size
        for i in range(len(self.conv_channels)):
            if side % 2:
                raise ConfigError(
                    f"image_size {self.image_size} is not pool-divisible at block {i + 1} "
                    f"(spatial side {side} is odd)"
                )
            side //= 2
        if side < 1:
            raise ConfigError(f"image_size {self.image_size} too small for "
                              f"{len(self.conv_channels)} pooling stages")

    @property
    def has_batchnorm(self) -> bool:
        return self.variant in BN_VARIANTS

    @property
    def has_dropout(self) -> bool:
        return self.variant in DROPOUT_VARIANTS

    @property
    def flat_features(self) -> int:
        side = self.image_size >> len(self.conv_channels)
        return self.conv_channels[-1] * side * side


class Model:
    """Sequential executor over the layer list built from a ModelSpec."""

    def __init__(self, spec: ModelSpec, params: ParameterSet, layers: list,
                 conv_names: list, bn_layers: dict):
        self.spec = spec
        self.params = params
        self.layers = layers
        self.conv_names = conv_names
        self._bn_layers = bn_layers

    def forward(self, x, mode: str = "train", rng=None):
        for layer in self.layers:
            x = layer.forward(x, mode=mode, rng=rng)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def buffers(self) -> dict:
        """BatchNorm running statistics, keyed for checkpointing."""
        out = {}
        for name, bn in self._bn_layers.items():
            out[f"{name}.running_mean"] = bn.running_mean
            out[f"{name}.running_var"] = bn.running_var
        return out

    def set_buffers(self, values: dict) -> None:
        for name, bn in self._bn_layers.items():
            for suffix, attr in (("running_mean", "running_mean"),
                                 ("running_var", "running_var")):
                key = f"{name}.{suffix}"
                if key not in values:
                    raise ConfigError(f"missing buffer {key}")
                arr = values[key]
                if arr.shape != getattr(bn, attr).shape:
                    raise ConfigError(
                        f"buffer {key} has shape {arr.shape}, expected "
                        f"{getattr(bn, attr).shape}"
                    )
                setattr(bn, attr, arr.copy())


def build_model(spec: ModelSpec, seed: int) -> Model:
    """Construct the variant's layer stack with seeded initialization."""
    rng = make_rng(seed, INIT)
    params = ParameterSet()
    layers = []
    conv_names = []
    bn_layers = {}
    in_ch = spec.in_channels
    pad = spec.kernel_size // 2
    for i, out_ch in enumerate(spec.conv_channels, start=1):
        name = f"conv{i}"
        layers.append(Conv2d(params, name, in_ch, out_ch, spec.kernel_size,
                             padding=pad, stride=1, rng=rng))
        conv_names.append(f"{name}.weight")
        if spec.has_batchnorm:
            bn = BatchNorm2d(params, f"bn{i}", out_ch)
            bn_layers[f"bn{i}"] = bn
            layers.append(bn)
        layers.append(Relu())
        layers.append(MaxPool2())
        in_ch = out_ch
    layers.append(Flatten())
    if spec.has_dropout:
        layers.append(Dropout(spec.dropout_p))
    layers.append(Dense(params, "dense1", spec.flat_features, spec.dense_hidden, rng=rng))
    layers.append(Relu())
    layers.append(Dense(params, "dense2", spec.dense_hidden, spec.num_classes, rng=rng))
    return Model(spec=spec, params=params, layers=layers,
                 conv_names=conv_names, bn_layers=bn_layers)
