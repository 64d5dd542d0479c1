"""Density-functional weight regularization on a minimal, deterministic
differentiable-training engine, with structural diagnostics (weight
entropy, histograms, filter spectra) and an experiment harness that
compares the penalty against L2, Dropout, and BatchNorm baselines."""

from .density import (EnergyBreakdown, EnergyConfig, WeightDensity,
                      dfreg_loss, estimate_density, gather_weights,
                      interaction_energy, kinetic_energy, scatter_grad,
                      shannon_entropy)
from .errors import (ConfigError, DfregError, NumericError, ParseError,
                     ShapeError)
from .gradcheck import gradient_check
from .harness import (MetricsRecord, TrainConfig, analyze_checkpoint,
                      analyze_model, evaluate, run_comparison, run_training,
                      train_step)
from .model import Model, ModelSpec, build_model
from .spectral import (FilterSpectrum, average_channel_spectrum,
                       dft2_magnitude, low_frequency_ratio)
from .tensor import Param, ParameterSet

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DfregError", "EnergyBreakdown", "EnergyConfig",
    "FilterSpectrum", "MetricsRecord", "Model", "ModelSpec", "NumericError",
    "Param", "ParameterSet", "ParseError", "ShapeError", "TrainConfig",
    "WeightDensity", "analyze_checkpoint", "analyze_model",
    "average_channel_spectrum", "build_model", "dfreg_loss",
    "dft2_magnitude", "estimate_density", "evaluate", "gather_weights",
    "gradient_check", "interaction_energy", "kinetic_energy",
    "low_frequency_ratio", "run_comparison", "run_training", "scatter_grad",
    "shannon_entropy", "train_step",
]
