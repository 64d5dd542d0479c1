"""Tensor contract and named parameter storage.

A tensor in this package is a C-contiguous ``float64`` ndarray: the shape
tuple plus a flat row-major buffer, which is exactly what the checkpoint
format serializes. ``as_tensor`` normalizes arbitrary array-likes into that
form and ``check_finite`` enforces the finite-output contract where an
operation declares one.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ConfigError

PARAM_KINDS = ("conv_kernel", "dense_weight", "bias", "bn_gamma", "bn_beta")


def as_tensor(data, shape=None) -> np.ndarray:
    """Coerce to a C-contiguous float64 array, optionally reshaped."""
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if shape is not None:
        arr = arr.reshape(shape)
    return arr


def check_finite(arr: np.ndarray, what: str = "tensor") -> np.ndarray:
    """Raise NumericError naming the first non-finite element, else pass through."""
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(np.ravel(arr)))[0])
        raise NumericError(f"{what} contains a non-finite value at flat index {bad}")
    return arr


@dataclass
class Param:
    """One named parameter: value and gradient buffers of identical shape."""

    name: str
    kind: str
    value: np.ndarray
    grad: np.ndarray

    @property
    def size(self) -> int:
        return self.value.size


class ParameterSet:
    """Ordered, uniquely named parameters.

    Iteration order is definition order and is stable across runs with the
    same construction sequence; optimizers, the weight gatherer, and the
    checkpoint writer all rely on that ordering.
    """

    def __init__(self):
        self._params: dict[str, Param] = {}

    def add(self, name: str, kind: str, value) -> Param:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        if kind not in PARAM_KINDS:
            raise ConfigError(f"unknown parameter kind {kind!r} for {name!r}")
        value = as_tensor(value)
        p = Param(name=name, kind=kind, value=value, grad=np.zeros_like(value))
        self._params[name] = p
        return p

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name: str) -> Param:
        try:
            return self._params[name]
        except KeyError:
            raise KeyError(f"no parameter named {name!r}") from None

    def names(self):
        return list(self._params)

    def zero_grads(self):
        for p in self._params.values():
            p.grad[...] = 0.0
