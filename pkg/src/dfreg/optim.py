"""Optimizers and learning-rate schedules.

SGD with momentum:  v <- mu * v + g;  w <- w - lr * v.
Adam keeps first/second moment estimates per parameter and applies the
bias-corrected update. Slot arrays live in an OptimizerState keyed by
parameter name so checkpoints can carry them if needed.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import ParameterSet

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


@dataclass
class OptimizerState:
    kind: str
    step_count: int = 0
    momentum: float = 0.9
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON
    slots: dict = field(default_factory=dict)


def make_optimizer(kind: str, params: ParameterSet, momentum: float = 0.9,
                   beta1: float = ADAM_BETA1, beta2: float = ADAM_BETA2,
                   epsilon: float = ADAM_EPSILON) -> OptimizerState:
    if kind not in ("sgd_momentum", "adam"):
        raise ConfigError(f"unknown optimizer {kind!r}")
    state = OptimizerState(kind=kind, momentum=momentum, beta1=beta1,
                           beta2=beta2, epsilon=epsilon)
    for p in params:
        if kind == "sgd_momentum":
            state.slots[p.name] = {"velocity": np.zeros_like(p.value)}
        else:
            state.slots[p.name] = {"m": np.zeros_like(p.value),
                                   "v": np.zeros_like(p.value)}
    return state


def _check_slot(name, slot, value):
    for key, arr in slot.items():
        if arr.shape != value.shape:
            raise ShapeError(
                f"optimizer slot {key!r} for {name} has shape {arr.shape}, "
                f"parameter has {value.shape}"
            )


def sgd_update(params: ParameterSet, state: OptimizerState, lr: float) -> None:
    if state.kind != "sgd_momentum":
        raise ConfigError(f"sgd_update called with {state.kind!r} state")
    state.step_count += 1
    for p in params:
        slot = state.slots[p.name]
        _check_slot(p.name, slot, p.value)
        v = slot["velocity"]
        v *= state.momentum
        v += p.grad
        p.value -= lr * v


def adam_update(params: ParameterSet, state: OptimizerState, lr: float) -> None:
    if state.kind != "adam":
        raise ConfigError(f"adam_update called with {state.kind!r} state")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for p in params:
        slot = state.slots[p.name]
        _check_slot(p.name, slot, p.value)
        m, v = slot["m"], slot["v"]
        m *= state.beta1
        m += (1.0 - state.beta1) * p.grad
        v *= state.beta2
        v += (1.0 - state.beta2) * p.grad * p.grad
        m_hat = m / bc1
        v_hat = v / bc2
        p.value -= lr * m_hat / (np.sqrt(v_hat) + state.epsilon)


def step_optimizer(params: ParameterSet, state: OptimizerState, lr: float) -> None:
    if state.kind == "sgd_momentum":
        sgd_update(params, state, lr)
    else:
        adam_update(params, state, lr)


@dataclass
class LrSchedule:
    kind: str = "constant"
    lr_max: float = 1e-3
    lr_min: float = 0.0
    total_steps: int = 1

    def __post_init__(self):
        if self.kind not in ("constant", "cosine_annealing"):
            raise ConfigError(f"unknown schedule {self.kind!r}")
        if self.lr_max <= 0.0:
            raise ConfigError(f"lr_max must be positive, got {self.lr_max}")
        if not 0.0 <= self.lr_min <= self.lr_max:
            raise ConfigError(
                f"need 0 <= lr_min <= lr_max, got lr_min={self.lr_min} lr_max={self.lr_max}"
            )
        if self.total_steps < 1:
            raise ConfigError(f"total_steps must be >= 1, got {self.total_steps}")


def cosine_lr(schedule: LrSchedule, step: int) -> float:
    """Learning rate at a given global step, step in [0, total_steps]."""
    if not 0 <= step <= schedule.total_steps:
        raise ConfigError(
            f"step {step} outside [0, {schedule.total_steps}]"
        )
    if schedule.kind == "constant":
        return schedule.lr_max
    frac = step / schedule.total_steps
    return schedule.lr_min + 0.5 * (schedule.lr_max - schedule.lr_min) * (1.0 + math.cos(math.pi * frac))
