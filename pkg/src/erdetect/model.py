"""Networks for metaphor probability estimation.

ERNetwork runs a weight-shared fine-tuned encoder over both the marked and
the masked input, extracts target-span and sentence-start vectors from each,
adds anchor vectors from a frozen copy of the original encoder, and scores
the concatenated local/global interactions. RSPVNetwork is the
realization-only ablation: one encoder pass over the marked input and a
single interaction over its sentence and target vectors.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field

import torch
from torch import nn

from .encoding import EncodedPair, collate_pairs
from .errors import CheckpointError, ConfigurationError, NumericError

DECISION_THRESHOLD = 0.5
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    hidden_size: int = 768
    num_layers: int = 12
    num_heads: int = 12
    ffn_size: int | None = None  # defaults to 4 * hidden_size
    max_positions: int = 512
    pad_id: int = 0
    dropout: float = 0.0


@dataclass(frozen=True)
class HeadConfig:
    hidden_size: int = 768
    hidden_dims: tuple[int, ...] = ()  # empty means (hidden_size,)
    activation: str | None = "relu"
    dropout: float = 0.0

    def resolved_dims(self) -> tuple[int, ...]:
        return self.hidden_dims or (self.hidden_size,)


class TransformerEncoder(nn.Module):
    """Bidirectional transformer encoder over subword ids.

    Parameterized by hidden size so the tiny randomly initialized encoders
    used in CPU tests and a full pretrained stack share one interface:
    forward(ids, attention_mask) -> [batch, length, hidden].
    """

    def __init__(self, config: EncoderConfig):
        super().__init__()
        if config.hidden_size % config.num_heads != 0:
            raise ConfigurationError(
                f"hidden_size {config.hidden_size} not divisible by "
                f"num_heads {config.num_heads}"
            )
        self.config = config
        ffn = config.ffn_size or 4 * config.hidden_size
        self.token_embedding = nn.Embedding(
            config.vocab_size, config.hidden_size, padding_idx=config.pad_id
        )
        self.position_embedding = nn.Embedding(config.max_positions, config.hidden_size)
        self.input_norm = nn.LayerNorm(config.hidden_size)
        self.layers = nn.ModuleList(
            nn.TransformerEncoderLayer(
                d_model=config.hidden_size,
                nhead=config.num_heads,
                dim_feedforward=ffn,
                dropout=config.dropout,
                activation="gelu",
                batch_first=True,
            )
            for _ in range(config.num_layers)
        )

    @property
    def hidden_size(self) -> int:
        return self.config.hidden_size

    @property
    def embedding_vocab_size(self) -> int:
        return self.token_embedding.num_embeddings

    def forward(self, ids: torch.Tensor, attention_mask: torch.Tensor) -> torch.Tensor:
        if ids.size(1) > self.config.max_positions:
            raise ConfigurationError(
                f"sequence length {ids.size(1)} exceeds max_positions "
                f"{self.config.max_positions}"
            )
        positions = torch.arange(ids.size(1), device=ids.device)
        x = self.token_embedding(ids) + self.position_embedding(positions)[None, :, :]
        x = self.input_norm(x)
        padding = attention_mask == 0
        for layer in self.layers:
            x = layer(x, src_key_padding_mask=padding)
        return x


class HFEncoder(nn.Module):
    """Wrapper exposing a Hugging Face encoder through the same interface."""

    def __init__(self, model, name: str):
        super().__init__()
        self.model = model
        self.name = name

    @classmethod
    def from_pretrained(cls, name: str, vocab_size: int | None = None) -> "HFEncoder":
        from transformers import AutoModel

        model = AutoModel.from_pretrained(name)
        if vocab_size is not None and vocab_size != model.get_input_embeddings().num_embeddings:
            model.resize_token_embeddings(vocab_size)
        return cls(model, name)

    @property
    def hidden_size(self) -> int:
        return self.model.config.hidden_size

    @property
    def embedding_vocab_size(self) -> int:
        return self.model.get_input_embeddings().num_embeddings

    def forward(self, ids: torch.Tensor, attention_mask: torch.Tensor) -> torch.Tensor:
        return self.model(input_ids=ids, attention_mask=attention_mask).last_hidden_state


def _interaction_mlp(in_dim: int, dims: tuple[int, ...], activation: str | None) -> nn.Sequential:
    if activation not in (None, "relu"):
        raise ConfigurationError(f"unsupported head activation {activation!r}")
    layers: list[nn.Module] = []
    prev = in_dim
    for width in dims:
        layers.append(nn.Linear(prev, width))
        if activation == "relu":
            layers.append(nn.ReLU())
        prev = width
    return nn.Sequential(*layers)


class InteractionHead(nn.Module):
    """Local and global interaction maps plus the probability head.

    local_interaction consumes [target_expectation ; target_realization],
    global_interaction consumes [sentence_expectation ; sentence_realization],
    and the classifier is a single affine map over their concatenation.
    """

    def __init__(self, config: HeadConfig):
        super().__init__()
        self.config = config
        d = config.hidden_size
        dims = config.resolved_dims()
        self.local_interaction = _interaction_mlp(2 * d, dims, config.activation)
        self.global_interaction = _interaction_mlp(2 * d, dims, config.activation)
        self.dropout = nn.Dropout(config.dropout)
        self.classifier = nn.Linear(2 * dims[-1], 1)


class RealizationHead(nn.Module):
    """Single interaction over [sentence_realization ; target_realization]."""

    def __init__(self, config: HeadConfig):
        super().__init__()
        self.config = config
        dims = config.resolved_dims()
        self.interaction = _interaction_mlp(2 * config.hidden_size, dims, config.activation)
        self.dropout = nn.Dropout(config.dropout)
        self.classifier = nn.Linear(dims[-1], 1)


@dataclass
class ERRepresentations:
    """The four fine-tuned vectors plus the two frozen anchors (batched)."""

    target_realization: torch.Tensor  # marked input, target span mean
    target_expectation: torch.Tensor  # masked input, mask span mean
    sentence_realization: torch.Tensor  # marked input, sequence-start slot
    sentence_expectation: torch.Tensor  # masked input, sequence-start slot
    anchor_target_expectation: torch.Tensor  # frozen encoder, mask span mean
    anchor_sentence_expectation: torch.Tensor  # frozen encoder, start slot

    def check_finite(self) -> None:
        for name, tensor in asdict(self).items():
            if not torch.isfinite(tensor).all():
                raise NumericError(f"non-finite values in {name}")


@dataclass(frozen=True)
class Prediction:
    instance_id: str
    probability: float
    predicted_label: int
    model_tag: str

    def __post_init__(self):
        if not (0.0 <= self.probability <= 1.0):
            raise NumericError(
                f"probability {self.probability} outside [0, 1] "
                f"for {self.instance_id}"
            )
        expected = int(self.probability >= DECISION_THRESHOLD)
        if self.predicted_label != expected:
            raise ConfigurationError(
                f"label {self.predicted_label} inconsistent with probability "
                f"{self.probability} at threshold {DECISION_THRESHOLD}"
            )

    @classmethod
    def from_probability(cls, instance_id: str, probability: float, model_tag: str) -> "Prediction":
        return cls(
            instance_id=instance_id,
            probability=probability,
            predicted_label=int(probability >= DECISION_THRESHOLD),
            model_tag=model_tag,
        )


def span_mean(hidden: torch.Tensor, span_mask: torch.Tensor) -> torch.Tensor:
    """Mean of hidden vectors over mask-flagged positions, per batch row."""
    weights = span_mask.to(hidden.dtype).unsqueeze(-1)
    total = (hidden * weights).sum(dim=1)
    count = span_mask.to(hidden.dtype).sum(dim=1).clamp(min=1.0).unsqueeze(-1)
    return total / count


def _check_encoder_pair(finetuned, frozen) -> None:
    if finetuned.hidden_size != frozen.hidden_size:
        raise ConfigurationError(
            f"encoder hidden sizes differ: {finetuned.hidden_size} vs {frozen.hidden_size}"
        )
    if finetuned.embedding_vocab_size != frozen.embedding_vocab_size:
        raise ConfigurationError(
            "fine-tuned and frozen encoders must share one vocabulary "
            f"({finetuned.embedding_vocab_size} vs {frozen.embedding_vocab_size})"
        )


class ERNetwork(nn.Module):
    """Expectation-realization classifier with frozen anchor encoder."""

    architecture = "er"

    def __init__(self, encoder: nn.Module, frozen_encoder: nn.Module, head: InteractionHead):
        super().__init__()
        _check_encoder_pair(encoder, frozen_encoder)
        if head.config.hidden_size != encoder.hidden_size:
            raise ConfigurationError(
                f"head hidden_size {head.config.hidden_size} does not match "
                f"encoder hidden_size {encoder.hidden_size}"
            )
        self.encoder = encoder
        self.frozen_encoder = frozen_encoder
        self.head = head
        for param in self.frozen_encoder.parameters():
            param.requires_grad_(False)
        self.frozen_encoder.eval()

    def train(self, mode: bool = True) -> "ERNetwork":
        super().train(mode)
        self.frozen_encoder.eval()  # anchors never see train-mode stochasticity
        return self

    def forward(self, batch: dict[str, torch.Tensor]) -> tuple[ERRepresentations, torch.Tensor]:
        marked = self.encoder(batch["realization_ids"], batch["realization_attn"])
        masked = self.encoder(batch["expectation_ids"], batch["expectation_attn"])
        with torch.no_grad():
            anchor = self.frozen_encoder(batch["expectation_ids"], batch["expectation_attn"])
        reps = ERRepresentations(
            target_realization=span_mean(marked, batch["realization_span_mask"]),
            target_expectation=span_mean(masked, batch["expectation_span_mask"]),
            sentence_realization=marked[:, 0],
            sentence_expectation=masked[:, 0],
            anchor_target_expectation=span_mean(anchor, batch["expectation_span_mask"]),
            anchor_sentence_expectation=anchor[:, 0],
        )
        local = self.head.local_interaction(
            self.head.dropout(
                torch.cat([reps.target_expectation, reps.target_realization], dim=-1)
            )
        )
        global_ = self.head.global_interaction(
            self.head.dropout(
                torch.cat([reps.sentence_expectation, reps.sentence_realization], dim=-1)
            )
        )
        logits = self.head.classifier(
            self.head.dropout(torch.cat([local, global_], dim=-1))
        ).squeeze(-1)
        return reps, logits


class RSPVNetwork(nn.Module):
    """Realization-only classifier over the marked input."""

    architecture = "rspv"

    def __init__(self, encoder: nn.Module, head: RealizationHead):
        super().__init__()
        if head.config.hidden_size != encoder.hidden_size:
            raise ConfigurationError(
                f"head hidden_size {head.config.hidden_size} does not match "
                f"encoder hidden_size {encoder.hidden_size}"
            )
        self.encoder = encoder
        self.head = head

    def forward(self, batch: dict[str, torch.Tensor]) -> tuple[None, torch.Tensor]:
        marked = self.encoder(batch["realization_ids"], batch["realization_attn"])
        target = span_mean(marked, batch["realization_span_mask"])
        sentence = marked[:, 0]
        interaction = self.head.interaction(
            self.head.dropout(torch.cat([sentence, target], dim=-1))
        )
        logits = self.head.classifier(self.head.dropout(interaction)).squeeze(-1)
        return None, logits


def probabilities(logits: torch.Tensor) -> torch.Tensor:
    if not torch.isfinite(logits).all():
        raise NumericError("non-finite classifier logits")
    return torch.sigmoid(logits)


def predict_batch(network: nn.Module, pairs: list[EncodedPair], pad_id: int,
                  model_tag: str) -> list[Prediction]:
    """Deterministic eval-mode scoring of a batch of encoded pairs."""
    was_training = network.training
    network.eval()
    try:
        with torch.no_grad():
            batch = collate_pairs(pairs, pad_id)
            _, logits = network(batch)
            probs = probabilities(logits)
    finally:
        network.train(was_training)
    return [
        Prediction.from_probability(pair.instance_id, float(p), model_tag)
        for pair, p in zip(pairs, probs)
    ]


def forward_er(
    pair: EncodedPair,
    finetuned_encoder: nn.Module,
    frozen_encoder: nn.Module,
    head: InteractionHead,
    pad_id: int,
    model_tag: str = "er",
) -> tuple[ERRepresentations, Prediction]:
    """Single-pair functional pass; freezes frozen_encoder in place."""
    network = ERNetwork(finetuned_encoder, frozen_encoder, head)
    network.eval()
    with torch.no_grad():
        batch = collate_pairs([pair], pad_id)
        reps, logits = network(batch)
        reps.check_finite()
        prob = float(probabilities(logits)[0])
    return reps, Prediction.from_probability(pair.instance_id, prob, model_tag)


def forward_rspv(
    pair: EncodedPair,
    finetuned_encoder: nn.Module,
    head: RealizationHead,
    pad_id: int,
    model_tag: str = "rspv",
) -> Prediction:
    network = RSPVNetwork(finetuned_encoder, head)
    network.eval()
    with torch.no_grad():
        batch = collate_pairs([pair], pad_id)
        _, logits = network(batch)
        prob = float(probabilities(logits)[0])
    return Prediction.from_probability(pair.instance_id, prob, model_tag)


def clone_frozen(encoder: nn.Module) -> nn.Module:
    """Deep copy used as the anchor; the copy starts bitwise-identical."""
    frozen = copy.deepcopy(encoder)
    for param in frozen.parameters():
        param.requires_grad_(False)
    frozen.eval()
    return frozen


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def _encoder_spec(encoder: nn.Module) -> dict:
    if isinstance(encoder, TransformerEncoder):
        return {"kind": "local", "config": asdict(encoder.config)}
    if isinstance(encoder, HFEncoder):
        return {
            "kind": "huggingface",
            "name": encoder.name,
            "vocab_size": encoder.embedding_vocab_size,
        }
    raise CheckpointError(f"cannot checkpoint encoder of type {type(encoder).__name__}")


def _build_encoder(spec: dict) -> nn.Module:
    if spec["kind"] == "local":
        return TransformerEncoder(EncoderConfig(**spec["config"]))
    if spec["kind"] == "huggingface":
        return HFEncoder.from_pretrained(spec["name"], vocab_size=spec["vocab_size"])
    raise CheckpointError(f"unknown encoder kind {spec['kind']!r}")


def save_checkpoint(network: nn.Module, path, meta: dict) -> None:
    """Single-file archive: parameters plus replay metadata.

    meta should carry seed, fold, and the similarity weights so a checkpoint
    is self-describing.
    """
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "architecture": network.architecture,
        "head_config": asdict(network.head.config),
        "state_dict": network.state_dict(),
        "meta": dict(meta),
    }
    if isinstance(network, ERNetwork):
        payload["encoder"] = _encoder_spec(network.encoder)
        payload["frozen_encoder"] = _encoder_spec(network.frozen_encoder)
    else:
        payload["encoder"] = _encoder_spec(network.encoder)
    torch.save(payload, path)


def load_checkpoint(path, expected_architecture: str | None = None):
    """Rebuild a network from a checkpoint; returns (network, meta)."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:  # noqa: BLE001 - torch raises various things
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint format {version!r} does not match supported "
            f"version {CHECKPOINT_VERSION}"
        )
    architecture = payload.get("architecture")
    if expected_architecture is not None and architecture != expected_architecture:
        raise CheckpointError(
            f"checkpoint holds a {architecture!r} model, expected "
            f"{expected_architecture!r}"
        )
    head_config = HeadConfig(**{
        **payload["head_config"],
        "hidden_dims": tuple(payload["head_config"]["hidden_dims"]),
    })
    if architecture == "er":
        network = ERNetwork(
            _build_encoder(payload["encoder"]),
            _build_encoder(payload["frozen_encoder"]),
            InteractionHead(head_config),
        )
    elif architecture == "rspv":
        network = RSPVNetwork(_build_encoder(payload["encoder"]), RealizationHead(head_config))
    else:
        raise CheckpointError(f"unknown architecture {architecture!r}")
    network.load_state_dict(payload["state_dict"])
    network.eval()
    return network, payload["meta"]
