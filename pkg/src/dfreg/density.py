"""Density-functional regularization over network weights.

The penalty treats the flattened convolutional weights as samples of a
one-dimensional density rho over a fixed binning grid. The regularizer is

    L = alpha * sum_i rho_i**2  +  kinetic_coeff * T[rho]  +  lam * sum_j w_j**2

with rho_i = n_i / N the normalized occupancy of bin i. The interaction
term sum rho_i**2 is minimized by a uniform spread of weights across bins
and maximized by a point mass, so descending on it pushes the weight
distribution toward higher entropy. T[rho] is the discrete kinetic energy
sum_i (rho_{i+1} - rho_i)**2 / bin_width, a first-difference discretization
of the integral of (d rho / d w)**2.

Two binning modes share one grid. Soft binning splits each weight's unit
mass linearly between the two nearest bin centers, which makes rho (and
hence the penalty) piecewise differentiable in the weights; training uses
it. Hard binning assigns the full mass to the containing bin and is used
for diagnostics. At bin centers the two modes agree. Out-of-range weights
clamp to the edge bins in both modes, so the total mass is always N.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, NumericError
from .tensor import ParameterSet

SOFT = "soft_triangular"
HARD = "hard"


@dataclass
class EnergyConfig:
    """Hyperparameters of the density penalty.

    lam is the L2 coefficient (serialized under the key "lambda").
    """

    alpha: float = 1e-3
    lam: float = 0.0
    kinetic_coeff: float = 0.0
    num_bins: int = 80
    range_lo: float = -1.0
    range_hi: float = 1.0
    binning: str = SOFT

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.lam < 0.0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.kinetic_coeff < 0.0:
            raise ConfigError(f"kinetic_coeff must be >= 0, got {self.kinetic_coeff}")
        if self.num_bins < 2:
            raise ConfigError(f"num_bins must be >= 2, got {self.num_bins}")
        if not (np.isfinite(self.range_lo) and np.isfinite(self.range_hi)):
            raise ConfigError("histogram range must be finite")
        if not self.range_lo < self.range_hi:
            raise ConfigError(
                f"need range_lo < range_hi, got [{self.range_lo}, {self.range_hi}]"
            )
        if self.binning == "soft":
            self.binning = SOFT
        if self.binning not in (SOFT, HARD):
            raise ConfigError(
                f"binning must be 'hard' or 'soft_triangular', got {self.binning!r}"
            )

    @property
    def bin_width(self) -> float:
        return (self.range_hi - self.range_lo) / self.num_bins


@dataclass
class WeightDensity:
    """A binned density: edges has num_bins + 1 entries, counts and rho have
    num_bins, and rho = counts / total_weights sums to 1."""

    edges: np.ndarray
    counts: np.ndarray
    rho: np.ndarray
    total_weights: int
    bin_width: float
    mode: str


@dataclass
class EnergyBreakdown:
    """Energy terms: dfreg_loss = alpha * interaction + kinetic_coeff *
    kinetic, and l2 = lambda * sum(w**2). All terms are >= 0."""

    interaction: float
    kinetic: float
    dfreg_loss: float
    l2: float


@dataclass
class WeightGather:
    """Layout of a flattened parameter group: slices[i] addresses names[i]
    within the flat vector."""

    names: list
    slices: list
    shapes: list


def gather_weights(params: ParameterSet, kinds=("conv_kernel",)):
    """Concatenate every parameter of the given kinds, in registration
    order, into one flat vector. Returns (flat, gather)."""
    names, slices, shapes, chunks = [], [], [], []
    offset = 0
    for p in params:
        if p.kind not in kinds:
            continue
        names.append(p.name)
        shapes.append(p.value.shape)
        slices.append((offset, offset + p.size))
        chunks.append(p.value.ravel())
        offset += p.size
    if not chunks:
        raise ConfigError(f"no parameters matched filter {tuple(kinds)}")
    flat = np.concatenate(chunks)
    return flat, WeightGather(names=names, slices=slices, shapes=shapes)


def scatter_grad(gather: WeightGather, flat_grad: np.ndarray,
                 params: ParameterSet) -> None:
    """Add a flat gradient back into the matching parameter grads."""
    for name, (lo, hi), shape in zip(gather.names, gather.slices, gather.shapes):
        params[name].grad += flat_grad[lo:hi].reshape(shape)


def estimate_density(weights: np.ndarray, config: EnergyConfig) -> WeightDensity:
    """Bin a flat weight vector into a normalized density."""
    weights = np.ascontiguousarray(np.asarray(weights, dtype=np.float64).ravel())
    n = weights.size
    if n == 0:
        raise ConfigError("cannot estimate a density from an empty weight vector")
    finite = np.isfinite(weights)
    if not finite.all():
        i = int(np.flatnonzero(~finite)[0])
        raise NumericError(
            f"weight vector contains non-finite value {weights[i]!r} at index {i}"
        )
    lo, hi, b = config.range_lo, config.range_hi, config.num_bins
    if config.binning == SOFT:
        counts = kernels.soft_bin_counts(weights, lo, hi, b)
    else:
        counts = kernels.hard_bin_counts(weights, lo, hi, b)
    edges = lo + (hi - lo) / b * np.arange(b + 1)
    edges[-1] = hi
    return WeightDensity(edges=edges, counts=counts, rho=counts / n,
                         total_weights=n, bin_width=config.bin_width,
                         mode=config.binning)


def interaction_energy(density: WeightDensity) -> float:
    """sum_i rho_i**2, in [1/num_bins, 1]."""
    return float(np.sum(density.rho * density.rho))


def kinetic_energy(density: WeightDensity) -> float:
    """sum_i (rho_{i+1} - rho_i)**2 / bin_width."""
    d = np.diff(density.rho)
    return float(np.sum(d * d) / density.bin_width)


def shannon_entropy(density: WeightDensity, base: float = None) -> float:
    """-sum_i rho_i * log(rho_i) with the convention 0 * log(0) = 0.

    Natural log by default (maximum ln(num_bins) at uniform); pass base
    (e.g. 2) to rescale.
    """
    rho = density.rho
    nz = rho[rho > 0.0]
    h = float(-np.sum(nz * np.log(nz)))
    if base is not None:
        if base <= 1.0:
            raise ConfigError(f"entropy log base must exceed 1, got {base}")
        h = float(h / np.log(base))
    return h


def _kinetic_grad_rho(rho: np.ndarray, bin_width: float) -> np.ndarray:
    # dT/drho_k from T = sum (rho_{i+1} - rho_i)^2 / width
    d = np.diff(rho)
    g = np.zeros_like(rho)
    g[:-1] -= 2.0 * d / bin_width
    g[1:] += 2.0 * d / bin_width
    return g


def dfreg_loss(weights: np.ndarray, config: EnergyConfig, with_grad: bool = True):
    """Evaluate the penalty on a flat weight vector.

    Returns (breakdown, grad); grad is None when with_grad is False, and
    the scalar loss added to the task loss is breakdown.dfreg_loss +
    breakdown.l2. Requesting a gradient under hard binning is an error
    whenever the density terms are active, because the hard histogram is
    piecewise constant in the weights; with alpha == kinetic_coeff == 0 the
    gradient is exactly the L2 term and either binning works.
    """
    weights = np.ascontiguousarray(np.asarray(weights, dtype=np.float64).ravel())
    density = estimate_density(weights, config)
    interaction = interaction_energy(density)
    kinetic = kinetic_energy(density)
    w_sq = float(np.sum(weights * weights))
    breakdown = EnergyBreakdown(
        interaction=interaction, kinetic=kinetic,
        dfreg_loss=config.alpha * interaction + config.kinetic_coeff * kinetic,
        l2=config.lam * w_sq)
    if not with_grad:
        return breakdown, None

    density_active = config.alpha > 0.0 or config.kinetic_coeff > 0.0
    if density_active and config.binning == HARD:
        raise NumericError(
            "hard binning has zero gradient almost everywhere; "
            "use soft_triangular binning to train on the density terms"
        )
    grad = np.zeros_like(weights)
    if density_active:
        d_rho = 2.0 * config.alpha * density.rho
        if config.kinetic_coeff > 0.0:
            d_rho += config.kinetic_coeff * _kinetic_grad_rho(density.rho, density.bin_width)
        grad += kernels.soft_bin_grad(weights, config.range_lo, config.range_hi,
                                      config.num_bins, d_rho, density.total_weights)
    if config.lam > 0.0:
        grad += 2.0 * config.lam * weights
    return breakdown, grad


def write_density_csv(density: WeightDensity, path) -> None:
    """Write the histogram as CSV with a comment line recording the grid."""
    lines = [
        f"# bins={density.rho.size} "
        f"range=[{float(density.edges[0])!r},{float(density.edges[-1])!r}] "
        f"mode={density.mode} total_weights={density.total_weights}",
        "bin_lo,bin_hi,count,rho",
    ]
    for i in range(density.rho.size):
        lines.append(
            f"{float(density.edges[i])!r},{float(density.edges[i + 1])!r},"
            f"{float(density.counts[i])!r},{float(density.rho[i])!r}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
