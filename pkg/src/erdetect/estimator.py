"""scikit-learn estimator facade over the training loop.

ERClassifier(architecture="er"|"rspv").fit(instances) trains a model end to
end (tokenizer construction, dev holdout, schedule, anchors) and then scores
new instances with predict / predict_proba, so the classifier drops into
standard cross-validation and pipeline tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .corpus import TargetInstance
from .encoding import HFTokenizerAdapter, SimpleSubwordTokenizer, encode_pair
from .errors import ConfigurationError, CorpusError
from .model import EncoderConfig, HeadConfig, HFEncoder, Prediction, TransformerEncoder, predict_batch
from .splits import split_train_dev
from .training import LossConfig, ScheduleConfig, train_run

ENCODER_KINDS = ("local", "huggingface")


def check_instances(X) -> list[TargetInstance]:
    """Validate an estimator input: a non-empty list of TargetInstance."""
    instances = list(X)
    if not instances:
        raise CorpusError("estimator received an empty instance list")
    for i, inst in enumerate(instances):
        if not isinstance(inst, TargetInstance):
            raise CorpusError(
                f"element {i} is {type(inst).__name__}, expected TargetInstance"
            )
    return instances


class ERClassifier(BaseEstimator, ClassifierMixin):
    """Metaphor classifier over annotated target instances.

    Defaults reproduce the published training regime (12 epochs, batch 32,
    peak rate 5e-5 with a two-epoch warmup, no dropout, both similarity
    weights 1). Tests and CPU smoke runs shrink the encoder via hidden_size /
    num_layers / num_heads and pass their own tokenizer.
    """

    def __init__(
        self,
        architecture: str = "er",
        encoder: str = "local",
        encoder_name: str = "roberta-base",
        hidden_size: int = 768,
        num_layers: int = 12,
        num_heads: int = 12,
        max_positions: int = 512,
        head_dims: tuple[int, ...] = (),
        head_activation: str | None = "relu",
        alpha_local: float = 1.0,
        alpha_global: float = 1.0,
        peak_lr: float = 5e-5,
        warmup_epochs: int = 2,
        epochs: int = 12,
        batch_size: int = 32,
        dropout: float = 0.0,
        max_len: int = 150,
        dev_fraction: float = 0.1,
        seed: int = 0,
        tokenizer=None,
        device: str = "cpu",
    ):
        self.architecture = architecture
        self.encoder = encoder
        self.encoder_name = encoder_name
        self.hidden_size = hidden_size
        self.num_layers = num_layers
        self.num_heads = num_heads
        self.max_positions = max_positions
        self.head_dims = head_dims
        self.head_activation = head_activation
        self.alpha_local = alpha_local
        self.alpha_global = alpha_global
        self.peak_lr = peak_lr
        self.warmup_epochs = warmup_epochs
        self.epochs = epochs
        self.batch_size = batch_size
        self.dropout = dropout
        self.max_len = max_len
        self.dev_fraction = dev_fraction
        self.seed = seed
        self.tokenizer = tokenizer
        self.device = device

    # -- construction helpers -------------------------------------------------

    def _build_tokenizer(self, instances):
        if self.tokenizer is not None:
            return self.tokenizer
        if self.encoder == "local":
            return SimpleSubwordTokenizer.from_instances(instances)
        if self.encoder == "huggingface":
            return HFTokenizerAdapter.from_pretrained(self.encoder_name)
        raise ConfigurationError(
            f"unknown encoder kind {self.encoder!r}; expected one of {ENCODER_KINDS}"
        )

    def _encoder_factory(self, tokenizer):
        if self.encoder == "local":
            config = EncoderConfig(
                vocab_size=tokenizer.vocab_size,
                hidden_size=self.hidden_size,
                num_layers=self.num_layers,
                num_heads=self.num_heads,
                max_positions=self.max_positions,
                pad_id=tokenizer.pad_id,
                dropout=self.dropout,
            )
            return lambda: TransformerEncoder(config)
        name, vocab = self.encoder_name, tokenizer.vocab_size
        return lambda: HFEncoder.from_pretrained(name, vocab_size=vocab)

    def _schedule(self) -> ScheduleConfig:
        return ScheduleConfig(
            peak_lr=self.peak_lr,
            warmup_epochs=self.warmup_epochs,
            total_epochs=self.epochs,
            batch_size=self.batch_size,
            dropout=self.dropout,
            max_len=self.max_len,
        )

    # -- sklearn API ----------------------------------------------------------

    def fit(self, X, y=None):
        instances = check_instances(X)
        if y is not None:
            given = np.asarray(y)
            stored = np.array([inst.label for inst in instances])
            if given.shape != stored.shape or (given != stored).any():
                raise CorpusError(
                    "y disagrees with the labels carried by the instances; "
                    "relabel the TargetInstance records instead"
                )
        tokenizer = self._build_tokenizer(instances)
        train_set, dev_set = split_train_dev(instances, self.seed, self.dev_fraction)
        result = train_run(
            train_set,
            dev_set,
            architecture=self.architecture,
            tokenizer=tokenizer,
            encoder_factory=self._encoder_factory(tokenizer),
            head_config=HeadConfig(
                hidden_size=self.hidden_size if self.encoder == "local" else self._hf_hidden(),
                hidden_dims=tuple(self.head_dims),
                activation=self.head_activation,
                dropout=self.dropout,
            ),
            schedule=self._schedule(),
            loss_cfg=LossConfig(self.alpha_local, self.alpha_global),
            seed=self.seed,
            device=self.device,
        )
        self.model_ = result.network
        self.tokenizer_ = tokenizer
        self.log_ = result.log
        self.dev_best_epoch_ = result.dev_best_epoch
        self.final_dev_f1_ = result.final_dev_f1
        self.training_warnings_ = result.warnings
        self.excluded_ = result.excluded_train + result.excluded_dev
        self.classes_ = np.array([0, 1])
        return self

    def _hf_hidden(self) -> int:
        # delay transformers import until an HF encoder is actually requested
        from transformers import AutoConfig

        return AutoConfig.from_pretrained(self.encoder_name).hidden_size

    def predictions(self, X, model_tag: str | None = None) -> list[Prediction]:
        """Score instances into Prediction records (the toolkit currency)."""
        check_is_fitted(self, "model_")
        instances = check_instances(X)
        tag = model_tag or f"{self.architecture}:seed={self.seed}"
        pairs = [encode_pair(inst, self.tokenizer_, self.max_len) for inst in instances]
        out: list[Prediction] = []
        for start in range(0, len(pairs), self.batch_size):
            out.extend(
                predict_batch(
                    self.model_, pairs[start : start + self.batch_size],
                    self.tokenizer_.pad_id, tag,
                )
            )
        return out

    def predict_proba(self, X) -> np.ndarray:
        probs = np.array([p.probability for p in self.predictions(X)])
        return np.column_stack([1.0 - probs, probs])

    def predict(self, X) -> np.ndarray:
        return np.array([p.predicted_label for p in self.predictions(X)])
