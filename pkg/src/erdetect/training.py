"""Composite loss, learning-rate schedule, and the single-run training loop.

The loss is binary cross-entropy minus a weighted cosine-similarity reward
between the fine-tuned expectation vectors and their frozen anchors. Because
the fine-tuned encoder starts as a copy of the frozen one, both similarity
terms are exactly 1 before the first update; training trades prediction
accuracy against drift away from the anchors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import torch

from .encoding import encode_instances
from .errors import ConfigurationError, NumericError, SplitError
from .model import (
    ERNetwork,
    ERRepresentations,
    HeadConfig,
    InteractionHead,
    RSPVNetwork,
    RealizationHead,
    clone_frozen,
    predict_batch,
    probabilities,
)

PROBABILITY_EPSILON = 1e-7
ARCHITECTURES = ("er", "rspv")

# tuning range for the similarity weight (applied to both loss terms)
TUNING_ALPHAS = (0.0, 0.5, 1.0, 2.0, 4.0)

GRID_KEYS = (
    "learning_rate",
    "dropout",
    "similarity_weight",
    "hidden_dims",
    "hidden_activation",
)

_UNSET = object()  # distinguishes an absent grid axis from a literal None value


@dataclass(frozen=True)
class LossConfig:
    """Similarity-reward weights: alpha_local for the target-slot term,
    alpha_global for the sentence term."""

    alpha_local: float = 1.0
    alpha_global: float = 1.0

    def __post_init__(self):
        if self.alpha_local < 0 or self.alpha_global < 0:
            raise ConfigurationError("similarity weights must be non-negative")


@dataclass(frozen=True)
class ScheduleConfig:
    peak_lr: float = 5e-5
    warmup_epochs: int = 2
    total_epochs: int = 12
    batch_size: int = 32
    dropout: float = 0.0
    max_len: int = 150

    def __post_init__(self):
        if self.total_epochs <= 0 or self.batch_size <= 0:
            raise ConfigurationError("epochs and batch size must be positive")
        if not 0 <= self.warmup_epochs < self.total_epochs:
            raise ConfigurationError(
                f"warmup_epochs {self.warmup_epochs} must lie inside "
                f"[0, total_epochs={self.total_epochs})"
            )
        if self.peak_lr <= 0:
            raise ConfigurationError("peak_lr must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError("dropout must be in [0, 1)")


@dataclass
class LossTerms:
    """Scalar loss components, kept as tensors so they backpropagate.

    total is computed as cross_entropy - alpha_local * local_similarity -
    alpha_global * global_similarity, in that evaluation order; logs and the
    decomposition checks rely on recomputing exactly this expression.
    """

    cross_entropy: torch.Tensor
    local_similarity: torch.Tensor
    global_similarity: torch.Tensor
    total: torch.Tensor

    def floats(self) -> dict[str, float]:
        return {
            "ce": float(self.cross_entropy.detach()),
            "sim_local": float(self.local_similarity.detach()),
            "sim_global": float(self.global_similarity.detach()),
            "total": float(self.total.detach()),
        }


def cosine_similarity(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Cosine over the last dimension.

    Written as dot/sqrt(dot*dot) rather than via normalized vectors so that
    bitwise-identical inputs give exactly 1.0 (IEEE sqrt(s*s) == s), which is
    what anchoring guarantees at step 0.
    """
    dot = (x * y).sum(dim=-1)
    denom = torch.sqrt((x * x).sum(dim=-1) * (y * y).sum(dim=-1))
    return dot / denom


def compute_loss(
    labels,
    probs,
    reps: ERRepresentations | None,
    cfg: LossConfig,
) -> LossTerms:
    """Cross-entropy minus the weighted anchor-similarity reward.

    reps is None for realization-only models; both similarity terms are then
    zero and total equals the cross-entropy exactly.
    """
    labels = torch.as_tensor(labels, dtype=torch.get_default_dtype())
    probs = torch.as_tensor(probs) if not torch.is_tensor(probs) else probs
    p = probs.clamp(PROBABILITY_EPSILON, 1.0 - PROBABILITY_EPSILON)
    ce = -(labels * torch.log(p) + (1.0 - labels) * torch.log(1.0 - p)).mean()
    if reps is None:
        sim_local = ce.new_zeros(())
        sim_global = ce.new_zeros(())
    else:
        sim_local = cosine_similarity(
            reps.anchor_target_expectation, reps.target_expectation
        ).mean()
        sim_global = cosine_similarity(
            reps.anchor_sentence_expectation, reps.sentence_expectation
        ).mean()
    total = ce - cfg.alpha_local * sim_local - cfg.alpha_global * sim_global
    for name, term in (
        ("cross-entropy", ce),
        ("local similarity", sim_local),
        ("global similarity", sim_global),
        ("total", total),
    ):
        if not torch.isfinite(term):
            raise NumericError(f"non-finite loss component: {name}")
    return LossTerms(ce, sim_local, sim_global, total)


def lr_at_step(step: int, steps_per_epoch: int, cfg: ScheduleConfig) -> float:
    """Piecewise-linear rate: 0 to peak over the warmup epochs, then back to 0."""
    if steps_per_epoch <= 0:
        raise ConfigurationError("steps_per_epoch must be positive")
    warmup = cfg.warmup_epochs * steps_per_epoch
    total = cfg.total_epochs * steps_per_epoch
    if not 0 <= step <= total:
        raise ConfigurationError(f"step {step} outside the schedule [0, {total}]")
    if step <= warmup:
        if warmup == 0:
            return cfg.peak_lr
        return cfg.peak_lr * step / warmup
    return cfg.peak_lr * (total - step) / (total - warmup)


@dataclass
class TrainingResult:
    network: torch.nn.Module
    log: list[dict]
    dev_best_epoch: int
    final_dev_f1: float
    warnings: list[str] = field(default_factory=list)
    excluded_train: list[tuple[str, str]] = field(default_factory=list)
    excluded_dev: list[tuple[str, str]] = field(default_factory=list)


def build_network(architecture: str, encoder_factory, head_config: HeadConfig):
    if architecture == "er":
        encoder = encoder_factory()
        return ERNetwork(encoder, clone_frozen(encoder), InteractionHead(head_config))
    if architecture == "rspv":
        return RSPVNetwork(encoder_factory(), RealizationHead(head_config))
    raise ConfigurationError(f"unknown architecture {architecture!r}; expected {ARCHITECTURES}")


def _dev_f1(network, pairs, labels, schedule, pad_id) -> tuple[float, bool]:
    # local import: evaluation also imports model, keep the cycle away
    from .evaluation import confusion_counts, prf

    predicted = []
    for start in range(0, len(pairs), schedule.batch_size):
        chunk = pairs[start : start + schedule.batch_size]
        predicted.extend(p.predicted_label for p in predict_batch(network, chunk, pad_id, "dev"))
    _, _, f1 = prf(confusion_counts(labels, predicted))
    degenerate = len(set(predicted)) < 2
    return f1, degenerate


def train_run(
    train_instances,
    dev_instances,
    architecture: str,
    tokenizer,
    encoder_factory,
    head_config: HeadConfig,
    schedule: ScheduleConfig,
    loss_cfg: LossConfig,
    seed: int,
    device: str = "cpu",
) -> TrainingResult:
    """Train one model for the full schedule; deterministic given seed.

    The seed fixes parameter initialization, batch shuffling, and any dropout
    draws. The final-epoch model is returned; the best dev epoch is only
    logged. A degenerate dev epoch (single predicted class) produces a
    warning record, never an abort.
    """
    if architecture not in ARCHITECTURES:
        raise ConfigurationError(f"unknown architecture {architecture!r}")
    train_ids = {i.instance_id for i in train_instances}
    dev_ids = {i.instance_id for i in dev_instances}
    if train_ids & dev_ids:
        raise SplitError(f"train and dev overlap: {sorted(train_ids & dev_ids)[:5]}")
    if not train_instances or not dev_instances:
        raise SplitError("train and dev sets must both be non-empty")

    torch.manual_seed(seed)
    network = build_network(architecture, encoder_factory, head_config).to(device)

    pairs, labels, excluded_train = encode_instances(train_instances, tokenizer, schedule.max_len)
    dev_pairs, dev_labels, excluded_dev = encode_instances(dev_instances, tokenizer, schedule.max_len)
    if not pairs or not dev_pairs:
        raise SplitError("all instances were excluded at encoding; nothing to train on")

    from .encoding import collate_pairs  # late import keeps module load light

    trainable = [p for p in network.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(trainable, lr=0.0)
    steps_per_epoch = math.ceil(len(pairs) / schedule.batch_size)
    shuffler = torch.Generator().manual_seed(seed)

    log: list[dict] = []
    warnings: list[str] = []
    label_tensor = torch.tensor(labels, dtype=torch.get_default_dtype(), device=device)
    best_epoch, best_f1 = 0, -1.0
    final_f1 = 0.0
    step = 0
    for epoch in range(1, schedule.total_epochs + 1):
        network.train()
        order = torch.randperm(len(pairs), generator=shuffler).tolist()
        epoch_sums = {"ce": 0.0, "sim_local": 0.0, "sim_global": 0.0, "total": 0.0}
        for start in range(0, len(order), schedule.batch_size):
            chosen = order[start : start + schedule.batch_size]
            batch = collate_pairs([pairs[i] for i in chosen], tokenizer.pad_id)
            batch = {k: v.to(device) for k, v in batch.items()}
            reps, logits = network(batch)
            probs = probabilities(logits)
            terms = compute_loss(label_tensor[chosen], probs, reps, loss_cfg)
            lr = lr_at_step(step, steps_per_epoch, schedule)
            for group in optimizer.param_groups:
                group["lr"] = lr
            optimizer.zero_grad()
            terms.total.backward()
            optimizer.step()
            values = terms.floats()
            log.append({"kind": "step", "step": step, "epoch": epoch, "lr": lr,
                        **values, "dev_f1": None})
            for key in epoch_sums:
                epoch_sums[key] += values[key]
            step += 1
        f1, degenerate = _dev_f1(network, dev_pairs, dev_labels, schedule, tokenizer.pad_id)
        if degenerate:
            warnings.append(f"epoch {epoch}: dev predictions collapsed to one class")
        n_batches = steps_per_epoch
        log.append({
            "kind": "epoch", "step": step, "epoch": epoch,
            "lr": lr_at_step(step, steps_per_epoch, schedule),
            **{k: epoch_sums[k] / n_batches for k in epoch_sums},
            "dev_f1": f1,
        })
        final_f1 = f1
        if f1 > best_f1:
            best_epoch, best_f1 = epoch, f1
    network.eval()
    return TrainingResult(
        network=network,
        log=log,
        dev_best_epoch=best_epoch,
        final_dev_f1=final_f1,
        warnings=warnings,
        excluded_train=excluded_train,
        excluded_dev=excluded_dev,
    )


@dataclass
class TuneResult:
    loss_config: LossConfig
    schedule: ScheduleConfig
    head_config: HeadConfig
    dev_f1: float
    trials: list[dict] = field(default_factory=list)


def tune_hyperparameters(
    grid: dict,
    train_instances,
    dev_instances,
    *,
    architecture: str,
    tokenizer,
    encoder_factory,
    hidden_size: int,
    base_schedule: ScheduleConfig = ScheduleConfig(),
    base_loss: LossConfig = LossConfig(),
    seed: int = 0,
    runner=None,
) -> TuneResult:
    """Exhaustive grid evaluation by dev F1.

    Ties break toward the smaller interaction head, then the lower learning
    rate. runner(schedule, loss_cfg, head_config) -> dev F1 is injectable so
    the selection logic is testable without training.
    """
    if not grid:
        raise ConfigurationError("hyperparameter grid is empty")
    unknown = set(grid) - set(GRID_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown grid keys {sorted(unknown)}; allowed: {GRID_KEYS}")
    for key, values in grid.items():
        if not values:
            raise ConfigurationError(f"grid key {key!r} has no values")

    if runner is None:
        def runner(schedule, loss_cfg, head_config):  # noqa: ANN001
            result = train_run(
                train_instances, dev_instances, architecture, tokenizer,
                encoder_factory, head_config, schedule, loss_cfg, seed,
            )
            return result.final_dev_f1

    axes = [tuple(grid[key]) if key in grid else (_UNSET,) for key in GRID_KEYS]
    best = None
    trials = []
    for lr, dropout, alpha, dims, activation in itertools.product(*axes):
        schedule = replace(
            base_schedule,
            peak_lr=lr if lr is not _UNSET else base_schedule.peak_lr,
            dropout=dropout if dropout is not _UNSET else base_schedule.dropout,
        )
        loss_cfg = (
            LossConfig(alpha_local=alpha, alpha_global=alpha)
            if alpha is not _UNSET
            else base_loss
        )
        head_config = HeadConfig(
            hidden_size=hidden_size,
            hidden_dims=tuple(dims) if dims is not _UNSET else (),
            activation=activation if activation is not _UNSET else "relu",
            dropout=schedule.dropout,
        )
        f1 = runner(schedule, loss_cfg, head_config)
        size = sum(head_config.resolved_dims())
        trials.append({
            "learning_rate": schedule.peak_lr, "dropout": schedule.dropout,
            "similarity_weight": loss_cfg.alpha_local,
            "hidden_dims": head_config.resolved_dims(),
            "hidden_activation": head_config.activation, "dev_f1": f1,
        })
        key = (-f1, size, schedule.peak_lr)
        if best is None or key < best[0]:
            best = (key, loss_cfg, schedule, head_config, f1)
    _, loss_cfg, schedule, head_config, f1 = best
    return TuneResult(loss_cfg, schedule, head_config, f1, trials)
