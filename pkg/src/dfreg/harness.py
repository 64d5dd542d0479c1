"""Training orchestration: single runs, variant comparisons, and
checkpoint analysis.

The total training loss is L_task + L_DFReg, where L_task is label-smoothed
softmax cross-entropy and L_DFReg is the density penalty over all conv
kernel weights jointly, recomputed every step in soft binning mode. The
logged dfreg_loss column holds the density terms (interaction + kinetic);
the L2 term is carried separately so train_loss = task + dfreg + l2 always
holds to float accuracy.

Determinism contract: (config, seed) fully determines every emitted byte
on one platform and backend. Each consumer of randomness draws from its
own seeded stream (init, shuffle, augment, dropout), so enabling one
feature never perturbs another's draws.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import kernels
from .checkpoint import config_hash, load_checkpoint_dir, save_checkpoint_dir
from .data import Dataset, augment_flip, load_mnist_dir, synth_dataset
from .density import (SOFT, EnergyConfig, dfreg_loss, estimate_density,
                      gather_weights, interaction_energy, scatter_grad,
                      shannon_entropy, write_density_csv)
from .errors import ConfigError, DfregError, NumericError
from .loss import softmax_cross_entropy
from .model import (Model, ModelSpec, PENALIZED_VARIANTS, VARIANTS,
                    build_model)
from .optim import (ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON, LrSchedule,
                    cosine_lr, make_optimizer, step_optimizer)
from .rng import AUGMENT, DROPOUT, SHUFFLE, make_rng
from .spectral import (average_channel_spectrum, low_frequency_ratio,
                       write_spectrum_csv)
from .tensor import ParameterSet

METRICS_HEADER = ("epoch,variant,seed,train_loss,task_loss,dfreg_loss,"
                  "test_loss,test_acc,entropy_global,sum_rho_sq,lr")
ENTROPY_HEADER = "layer,entropy,bins,mode,log_base"
EVAL_BATCH = 256
GLOBAL_LAYER = "all_conv"


@dataclass
class TrainConfig:
    variant: str = "plain"
    name: str = ""
    epochs: int = 10
    batch_size: int = 64
    lr: float = 1e-3
    lr_min: float = 0.0
    optimizer: str = "adam"
    momentum: float = 0.9
    schedule: str = "cosine_annealing"
    smoothing: float = 0.1
    energy: EnergyConfig = None
    seed: int = 0
    dataset: str = "synth"
    out_dir: str = "runs"
    augment: bool = False
    train_limit: int = 0
    test_limit: int = 0
    synth_train: int = 2000
    synth_test: int = 500
    synth_classes: int = 4
    image_size: int = 28
    conv_channels: tuple = (16, 32)
    kernel_size: int = 3
    dropout_p: float = 0.5
    dense_hidden: int = 128

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(
                f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}"
            )
        if self.energy is None:
            # The penalty strength defaults on for the dfreg variants only.
            alpha = 1e-3 if self.variant in PENALIZED_VARIANTS else 0.0
            self.energy = EnergyConfig(alpha=alpha)
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.variant in ("batchnorm", "dfreg") and self.batch_size < 2:
            raise ConfigError(
                f"variant {self.variant} trains batch statistics and needs "
                f"batch_size >= 2, got {self.batch_size}"
            )
        if self.optimizer not in ("adam", "sgd_momentum"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if not 0.0 <= self.smoothing < 1.0:
            raise ConfigError(f"smoothing must be in [0, 1), got {self.smoothing}")
        density_active = self.energy.alpha > 0.0 or self.energy.kinetic_coeff > 0.0
        if self.variant not in PENALIZED_VARIANTS and density_active:
            raise ConfigError(
                f"variant {self.variant} does not train with the density penalty; "
                "alpha and kinetic_coeff must be 0"
            )
        if self.variant not in PENALIZED_VARIANTS + ("l2",) and self.energy.lam > 0.0:
            raise ConfigError(
                f"variant {self.variant} does not use weight decay; lambda must be 0"
            )
        if density_active and self.energy.binning != SOFT:
            raise ConfigError(
                "training with the density penalty requires soft_triangular binning"
            )
        if not (self.dataset == "synth" or self.dataset.startswith("mnist:")):
            raise ConfigError(
                f"dataset must be 'synth' or 'mnist:<dir>', got {self.dataset!r}"
            )
        if not self.name:
            self.name = f"{self.variant}-s{self.seed}"
        # Schedule parameters are validated eagerly so bad configs fail
        # before any files are written.
        LrSchedule(kind=self.schedule, lr_max=self.lr, lr_min=self.lr_min,
                   total_steps=1)

    def model_spec(self, num_classes: int, in_channels: int,
                   image_size: int) -> ModelSpec:
        return ModelSpec(variant=self.variant,
                         conv_channels=self.conv_channels,
                         kernel_size=self.kernel_size,
                         dropout_p=self.dropout_p,
                         dense_hidden=self.dense_hidden,
                         num_classes=num_classes,
                         in_channels=in_channels,
                         image_size=image_size)

    def resolved(self) -> dict:
        """Fully-resolved configuration for the config.json echo."""
        out = asdict(self)
        energy = out.pop("energy")
        energy["lambda"] = energy.pop("lam")
        out["energy"] = energy
        out["conv_channels"] = list(self.conv_channels)
        out["adam_beta1"] = ADAM_BETA1
        out["adam_beta2"] = ADAM_BETA2
        out["adam_epsilon"] = ADAM_EPSILON
        out["backend"] = kernels.BACKEND
        out["entropy_log_base"] = "e"
        return out


@dataclass
class MetricsRecord:
    epoch: int
    variant: str
    seed: int
    train_loss: float
    task_loss: float
    dfreg_loss: float
    test_loss: float
    test_acc: float
    entropy_global: float
    sum_rho_sq: float
    lr: float
    l2_loss: float = 0.0
    per_layer_entropy: list = field(default_factory=list)

    def csv_row(self) -> str:
        cells = [str(self.epoch), self.variant, str(self.seed)]
        for v in (self.train_loss, self.task_loss, self.dfreg_loss,
                  self.test_loss, self.test_acc, self.entropy_global,
                  self.sum_rho_sq, self.lr):
            cells.append(repr(float(v)))
        return ",".join(cells)


@dataclass
class StepMetrics:
    task_loss: float
    dfreg_loss: float
    l2_loss: float
    lr: float

    @property
    def total_loss(self) -> float:
        return self.task_loss + self.dfreg_loss + self.l2_loss


@dataclass
class RunResult:
    config: dict
    run_dir: Path
    records: list
    csv_path: Path


def _hard_config(energy: EnergyConfig) -> EnergyConfig:
    return EnergyConfig(alpha=0.0, lam=0.0, kinetic_coeff=0.0,
                        num_bins=energy.num_bins,
                        range_lo=energy.range_lo, range_hi=energy.range_hi,
                        binning="hard")


def train_step(model: Model, batch, config: TrainConfig, opt_state, rng,
               schedule: LrSchedule = None, step: int = 0) -> StepMetrics:
    """One optimization step: task loss, penalty (when active), update."""
    images, labels = batch
    model.params.zero_grads()
    logits = model.forward(images, mode="train", rng=rng)
    task, dlogits = softmax_cross_entropy(logits, labels, config.smoothing)
    model.backward(dlogits)
    e = config.energy
    dfreg_val = 0.0
    l2_val = 0.0
    if e.alpha > 0.0 or e.kinetic_coeff > 0.0 or e.lam > 0.0:
        flat, gather = gather_weights(model.params)
        breakdown, grad = dfreg_loss(flat, e, with_grad=True)
        scatter_grad(gather, grad, model.params)
        dfreg_val = breakdown.dfreg_loss
        l2_val = breakdown.l2
    lr = cosine_lr(schedule, step) if schedule is not None else config.lr
    step_optimizer(model.params, opt_state, lr)
    return StepMetrics(task_loss=task, dfreg_loss=dfreg_val, l2_loss=l2_val,
                       lr=lr)


def evaluate(model: Model, dataset: Dataset, batch_size: int = EVAL_BATCH):
    """Mean plain cross-entropy loss and argmax accuracy in eval mode.

    Logit ties break toward the lower class index.
    """
    n = len(dataset)
    if n == 0:
        raise ConfigError("cannot evaluate on an empty dataset")
    loss_sum = 0.0
    correct = 0
    for start in range(0, n, batch_size):
        images = dataset.images[start:start + batch_size]
        labels = dataset.labels[start:start + batch_size]
        logits = model.forward(images, mode="eval", rng=None)
        loss, _ = softmax_cross_entropy(logits, labels, smoothing=0.0)
        loss_sum += loss * images.shape[0]
        correct += int(np.sum(np.argmax(logits, axis=1) == labels))
    return loss_sum / n, correct / n


def _density_diagnostics(model: Model, energy: EnergyConfig):
    """Hard-binned global and per-layer conv density summaries."""
    hard = _hard_config(energy)
    flat, _ = gather_weights(model.params)
    density = estimate_density(flat, hard)
    entropy_global = shannon_entropy(density)
    sum_rho_sq = interaction_energy(density)
    per_layer = []
    for name in model.conv_names:
        d = estimate_density(model.params[name].value, hard)
        per_layer.append((name, shannon_entropy(d), hard.num_bins, "hard"))
    return entropy_global, sum_rho_sq, per_layer


def _load_dataset(config: TrainConfig):
    if config.dataset == "synth":
        train = synth_dataset(config.seed, config.synth_train,
                              config.synth_classes, config.image_size, "train")
        test = synth_dataset(config.seed, config.synth_test,
                             config.synth_classes, config.image_size, "test")
    else:
        directory = config.dataset.split(":", 1)[1]
        if not directory:
            raise ConfigError("dataset 'mnist:' needs a directory: mnist:<dir>")
        train, test = load_mnist_dir(directory)
    train = train.subset(config.train_limit)
    test = test.subset(config.test_limit)
    return train, test


def _attribute_non_finite(params: ParameterSet):
    for p in params:
        if not np.all(np.isfinite(p.value)):
            return p.name
    return None


def write_metrics_csv(records, path, energy: EnergyConfig) -> None:
    lines = [
        f"# entropy_global: bins={energy.num_bins} "
        f"range=[{energy.range_lo!r},{energy.range_hi!r}] mode=hard log_base=e",
        METRICS_HEADER,
    ]
    lines.extend(r.csv_row() for r in records)
    Path(path).write_text("\n".join(lines) + "\n")


def run_training(config: TrainConfig) -> RunResult:
    """Full deterministic training run; writes every declared artifact."""
    run_dir = Path(config.out_dir) / config.name
    run_dir.mkdir(parents=True, exist_ok=True)
    analysis_dir = run_dir / "analysis"
    analysis_dir.mkdir(exist_ok=True)
    resolved = config.resolved()
    _write_json(run_dir / "config.json", resolved)

    train, test = _load_dataset(config)
    if len(train) == 0:
        raise ConfigError("training split is empty")
    spec = config.model_spec(num_classes=train.num_classes,
                             in_channels=train.images.shape[1],
                             image_size=train.images.shape[2])
    model = build_model(spec, config.seed)

    steps_per_epoch = len(train) // config.batch_size
    if config.epochs > 0 and steps_per_epoch == 0:
        raise ConfigError(
            f"batch_size {config.batch_size} exceeds training set size {len(train)}"
        )
    total_steps = max(config.epochs * steps_per_epoch, 1)
    schedule = LrSchedule(kind=config.schedule, lr_max=config.lr,
                          lr_min=config.lr_min, total_steps=total_steps)
    opt_state = make_optimizer(config.optimizer, model.params,
                               momentum=config.momentum)
    shuffle_rng = make_rng(config.seed, SHUFFLE)
    augment_rng = make_rng(config.seed, AUGMENT)
    dropout_rng = make_rng(config.seed, DROPOUT)

    records = []
    nan = float("nan")
    test_loss, test_acc = evaluate(model, test)
    h, s, per_layer = _density_diagnostics(model, config.energy)
    records.append(MetricsRecord(
        epoch=0, variant=config.variant, seed=config.seed,
        train_loss=nan, task_loss=nan, dfreg_loss=nan,
        test_loss=test_loss, test_acc=test_acc,
        entropy_global=h, sum_rho_sq=s, lr=cosine_lr(schedule, 0),
        per_layer_entropy=per_layer))

    step = 0
    for epoch in range(1, config.epochs + 1):
        perm = shuffle_rng.permutation(len(train))
        sums = {"task": 0.0, "dfreg": 0.0, "l2": 0.0}
        last_lr = cosine_lr(schedule, step)
        for b in range(steps_per_epoch):
            idx = perm[b * config.batch_size:(b + 1) * config.batch_size]
            images = train.images[idx]
            labels = train.labels[idx]
            if config.augment:
                images = augment_flip(images, augment_rng)
            try:
                sm = train_step(model, (images, labels), config, opt_state,
                                dropout_rng, schedule, step)
            except DfregError as exc:
                raise type(exc)(f"epoch {epoch} step {step}: {exc}") from exc
            if not math.isfinite(sm.total_loss):
                culprit = _attribute_non_finite(model.params)
                where = f" (parameter {culprit})" if culprit else ""
                raise NumericError(
                    f"epoch {epoch} step {step}: non-finite training loss "
                    f"{sm.total_loss}{where}"
                )
            sums["task"] += sm.task_loss
            sums["dfreg"] += sm.dfreg_loss
            sums["l2"] += sm.l2_loss
            last_lr = sm.lr
            step += 1
        task_mean = sums["task"] / steps_per_epoch
        dfreg_mean = sums["dfreg"] / steps_per_epoch
        l2_mean = sums["l2"] / steps_per_epoch
        test_loss, test_acc = evaluate(model, test)
        h, s, per_layer = _density_diagnostics(model, config.energy)
        records.append(MetricsRecord(
            epoch=epoch, variant=config.variant, seed=config.seed,
            train_loss=task_mean + dfreg_mean + l2_mean, task_loss=task_mean,
            dfreg_loss=dfreg_mean, test_loss=test_loss, test_acc=test_acc,
            entropy_global=h, sum_rho_sq=s, lr=last_lr, l2_loss=l2_mean,
            per_layer_entropy=per_layer))

    csv_path = run_dir / "metrics.csv"
    write_metrics_csv(records, csv_path, config.energy)
    meta = {
        "step": step,
        "epochs": config.epochs,
        "variant": config.variant,
        "seed": config.seed,
        "config_hash": config_hash(resolved),
        "config": resolved,
    }
    save_checkpoint_dir(run_dir, model.params, meta, model.buffers())
    analyze_model(model, analysis_dir, config.energy)
    return RunResult(config=resolved, run_dir=run_dir, records=records,
                     csv_path=csv_path)


def _write_json(path, payload) -> None:
    import json

    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def _match_layers(available, selectors):
    if not selectors:
        return list(available)
    chosen = []
    for sel in selectors:
        hits = [n for n in available
                if n == sel or n.split(".")[0] == sel]
        if not hits:
            raise ConfigError(
                f"layer selector {sel!r} matches nothing; available: "
                f"{', '.join(available)}"
            )
        for h in hits:
            if h not in chosen:
                chosen.append(h)
    return chosen


def analyze_model(model_or_params, out_dir, energy: EnergyConfig = None,
                  layers=None, radius: float = 1.0,
                  log_base: str = "e") -> dict:
    """Per-layer hard densities, entropies, and spectra for conv kernels.

    Accepts a Model or a bare ParameterSet. Writes density_<layer>.csv,
    spectrum_<layer>.csv, and entropy.csv under out_dir and returns the
    results keyed by layer name (plus an all-conv aggregate density).
    log_base ('e', '2', or '10') rescales the reported entropies and is
    recorded per CSV row.
    """
    if log_base not in ("e", "2", "10"):
        raise ConfigError(f"log_base must be 'e', '2', or '10', got {log_base!r}")
    base = None if log_base == "e" else float(log_base)
    energy = energy or EnergyConfig(alpha=0.0)
    hard = _hard_config(energy)
    params = model_or_params.params if isinstance(model_or_params, Model) else model_or_params
    conv = [p for p in params if p.kind == "conv_kernel"]
    if not conv:
        raise ConfigError("no conv kernels to analyze")
    names = [p.name for p in conv]
    chosen = _match_layers(names, layers)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = {}
    entropy_rows = []
    for name in chosen:
        value = params[name].value
        density = estimate_density(value, hard)
        entropy = shannon_entropy(density, base)
        spectrum = average_channel_spectrum(value, layer_name=name)
        lfr = low_frequency_ratio(spectrum, radius)
        write_density_csv(density, out_dir / f"density_{name}.csv")
        write_spectrum_csv(spectrum, out_dir / f"spectrum_{name}.csv", radius)
        entropy_rows.append((name, entropy))
        results[name] = {"density": density, "entropy": entropy,
                         "spectrum": spectrum, "low_frequency_ratio": lfr}
    flat = np.concatenate([params[n].value.ravel() for n in chosen])
    global_density = estimate_density(flat, hard)
    global_entropy = shannon_entropy(global_density, base)
    write_density_csv(global_density, out_dir / f"density_{GLOBAL_LAYER}.csv")
    entropy_rows.append((GLOBAL_LAYER, global_entropy))
    results[GLOBAL_LAYER] = {"density": global_density,
                             "entropy": global_entropy}
    lines = [ENTROPY_HEADER]
    for name, entropy in entropy_rows:
        lines.append(f"{name},{entropy!r},{hard.num_bins},hard,{log_base}")
    (out_dir / "entropy.csv").write_text("\n".join(lines) + "\n")
    return results


def analyze_checkpoint(checkpoint_dir, out_dir, energy: EnergyConfig = None,
                       layers=None, radius: float = 1.0,
                       log_base: str = "e") -> dict:
    """analyze_model over a saved checkpoint directory."""
    params, _, _ = load_checkpoint_dir(checkpoint_dir)
    return analyze_model(params, out_dir, energy, layers, radius, log_base)


def _comparison_worker(config: TrainConfig) -> dict:
    try:
        result = run_training(config)
        return {"name": config.name, "variant": config.variant,
                "seed": config.seed, "status": "ok", "error": "",
                "records": result.records, "run_dir": str(result.run_dir)}
    except Exception as exc:
        return {"name": config.name, "variant": config.variant,
                "seed": config.seed, "status": "failed",
                "error": f"{type(exc).__name__}: {exc}", "records": [],
                "run_dir": ""}


def run_comparison(configs: list, out_dir) -> dict:
    """Run every config (its own run directory), then merge metrics.

    A failed run contributes a failed summary row; the others still
    complete. DFREG_THREADS > 1 runs the variants in separate processes.
    """
    if not configs:
        raise ConfigError("run_comparison needs at least one config")
    datasets = {c.dataset for c in configs}
    if len(datasets) > 1:
        raise ConfigError(
            f"comparison configs must share one dataset, got {sorted(datasets)}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = set()
    for i, config in enumerate(configs):
        config.out_dir = str(out_dir / "runs")
        config.name = f"{i:02d}-{config.name}"
        if config.name in names:
            raise ConfigError(f"duplicate run name {config.name!r}")
        names.add(config.name)
    _write_json(out_dir / "config.json",
                {"runs": [c.resolved() for c in configs]})

    threads = int(os.environ.get("DFREG_THREADS", "1") or "1")
    if threads > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(configs))) as pool:
            outcomes = list(pool.map(_comparison_worker, configs))
    else:
        outcomes = [_comparison_worker(c) for c in configs]

    energy = configs[0].energy
    lines = [
        f"# entropy_global: bins={energy.num_bins} "
        f"range=[{energy.range_lo!r},{energy.range_hi!r}] mode=hard log_base=e",
        METRICS_HEADER,
    ]
    summary = ["name,variant,seed,status,final_test_acc,final_entropy_global,"
               "final_sum_rho_sq,error"]
    for outcome in outcomes:
        for record in outcome["records"]:
            lines.append(record.csv_row())
        if outcome["status"] == "ok":
            final = outcome["records"][-1]
            summary.append(
                f"{outcome['name']},{outcome['variant']},{outcome['seed']},ok,"
                f"{final.test_acc!r},{final.entropy_global!r},{final.sum_rho_sq!r},"
            )
        else:
            error = outcome["error"].replace(",", ";").replace("\n", " ")
            summary.append(
                f"{outcome['name']},{outcome['variant']},{outcome['seed']},failed,"
                f"nan,nan,nan,{error}"
            )
    (out_dir / "comparison.csv").write_text("\n".join(lines) + "\n")
    (out_dir / "summary.csv").write_text("\n".join(summary) + "\n")
    return {"out_dir": out_dir, "outcomes": outcomes,
            "comparison_csv": out_dir / "comparison.csv",
            "summary_csv": out_dir / "summary.csv"}
